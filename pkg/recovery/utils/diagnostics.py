"""
Numerical checks of the recovery theory.

Everything here evaluates fully specified expressions on concrete instances:
the rotation-invariant distance, Monte-Carlo RIP estimates (lower bounds on
the true constant), the noise condition, the contraction factor of the SVRG
epochs and the deterministic inequalities the convergence analysis is built
from. Each check can be rendered as a JSON report
{check, inputs, margins, pass, seed}.
"""

import json
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np

from recovery.exceptions import ConfigurationError, DegenerateInputError, DimensionMismatchError, RankDeficiencyError
from recovery.utils.dense_core import (
    Matrix,
    Vector,
    frobenius_inner,
    frobenius_norm,
    procrustes_rotation,
    random_orthogonal,
    spectral_norm,
    truncated_svd,
)
from recovery.utils.objective import FactorPair, grad_component, grad_full, objective_full
from recovery.utils.seeds import derive_rng, derive_seed
from recovery.utils.sensing import EnsembleSpec, NoiseSpec, SensingDataset, apply_operator, generate_dataset

logger = logging.getLogger(__name__)

INEQUALITY_SLACK = 1e-10
IDENTITY_TOL = 1e-12
RANK_TOL = 1e-12
# RIP level under which the local curvature and smoothness bounds are guaranteed.
RIP_PRECONDITION = 1.0 / 16.0

# Constants of the contraction factor of an SVRG epoch.
RHO_PREFACTOR = 15.0
RHO_SMOOTHNESS = 384.0
STEP_DENOMINATOR = 576.0
SIMPLIFIED_OFFSET = 2.0 / 3.0


def _holds(lhs: float, rhs: float, slack: float = INEQUALITY_SLACK) -> bool:
    """lhs ≤ rhs up to a slack relative to the magnitude of both sides."""
    return lhs <= rhs + slack * max(1.0, abs(lhs), abs(rhs))


@dataclass(frozen=True)
class SpectralSummary:
    sigma1: float
    sigma_r: float
    kappa: float
    r: int

    def __post_init__(self):
        if not self.sigma_r > 0 or self.sigma1 < self.sigma_r:
            raise ConfigurationError(f"need sigma1 >= sigma_r > 0, got {self.sigma1} and {self.sigma_r}")

    @classmethod
    def from_matrix(cls, x: Matrix, r: int) -> "SpectralSummary":
        svd = truncated_svd(x, r)
        sigma1, sigma_r = float(svd.s[0]), float(svd.s[-1])
        if sigma_r <= RANK_TOL * max(sigma1, 1.0):
            raise RankDeficiencyError(f"matrix has numerical rank below {r}")
        return cls(sigma1=sigma1, sigma_r=sigma_r, kappa=sigma1 / sigma_r, r=r)


@dataclass(frozen=True)
class RipEstimate:
    """
    Monte-Carlo estimate of the RIP constant of order r_order.

    delta_hat is the largest |(1/M)‖A(X)‖² / ‖X‖_F² − 1| seen over the sampled
    matrices, so it only bounds the true constant from below.
    max_ratio_dev is the largest upward deviation (1/M)‖A(X)‖² / ‖X‖_F² − 1.
    """

    r_order: int
    delta_hat: float
    trials: int
    max_ratio_dev: float


@dataclass(frozen=True)
class ContractionReport:
    """
    rho is the closed-form contraction factor and decides `converges`.
    rho_simplified is the simplified form 15κ/(ησ₁m) + 2/3 quoted for the
    step-size regime ησ₁ = 1/(576κ(1+δ′)²); rho_limit is the m → ∞ limit
    of rho.
    """

    eta: float
    m: int
    kappa: float
    sigma1: float
    delta4r_prime: float
    rho: float
    rho_simplified: float
    rho_limit: float
    converges: bool
    prescribed_regime: bool


@dataclass(frozen=True, eq=False)
class AlignmentResult:
    rotation: Matrix
    h: Matrix
    dist: float


@dataclass(frozen=True)
class InequalityCheck:
    check: str
    margins: Dict[str, float]
    passed: bool
    applicable: bool = True


@dataclass(frozen=True)
class CurvatureReport:
    """Margins (rhs − lhs for smoothness, lhs − rhs for curvature) of the local conditions."""

    curvature_lhs: float
    curvature_rhs: float
    curvature_margin: float
    smoothness_margins: List[float]
    regularizer_identity_gap: float
    delta_prime: float

    @property
    def curvature_holds(self) -> bool:
        return _holds(self.curvature_rhs, self.curvature_lhs)

    @property
    def smoothness_holds(self) -> bool:
        return all(margin >= -INEQUALITY_SLACK * max(1.0, abs(margin)) for margin in self.smoothness_margins)

    @property
    def passed(self) -> bool:
        # ‖Z̃ᵀZ‖_F and ‖UᵀU − VᵀV‖_F are the same quantity.
        return self.curvature_holds and self.smoothness_holds and self.regularizer_identity_gap <= IDENTITY_TOL


@dataclass(frozen=True)
class InitReport:
    """Quality of an initial factor pair against a known X*."""

    x_error: float
    x_error_spectral: float
    sigma_r: float
    dist: float
    in_ball: bool
    closeness_bound: Optional[float]


@dataclass
class GradientCheck:
    max_relative_deviation: float
    h: float
    entries: int
    details: Dict[str, float] = field(default_factory=dict)


def report(check: str, inputs: Dict[str, Any], margins: Dict[str, Any], passed: bool, seed: Optional[int]) -> Dict[str, Any]:
    return {"check": check, "inputs": inputs, "margins": margins, "pass": bool(passed), "seed": seed}


def dump_report(payload: Dict[str, Any]) -> str:
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def lift(z: FactorPair) -> Matrix:
    """Y = Z Zᵀ, the (d1+d2)×(d1+d2) PSD lift of Z = [U; V]."""
    stacked = z.stacked
    return stacked @ stacked.T


def distance(z: FactorPair, zstar: FactorPair) -> AlignmentResult:
    """d(Z, Z*) = min over orthogonal R of ‖Z − Z*R‖_F."""
    if (z.d1, z.d2, z.r) != (zstar.d1, zstar.d2, zstar.r):
        raise DimensionMismatchError(f"factor pairs of shapes {(z.d1, z.d2, z.r)} and {(zstar.d1, zstar.d2, zstar.r)}")
    stacked, target = z.stacked, zstar.stacked
    rotation = procrustes_rotation(stacked, target)
    h = stacked - target @ rotation
    return AlignmentResult(rotation=rotation, h=h, dist=frobenius_norm(h))


def random_low_rank(rng: np.random.Generator, d1: int, d2: int, r: int) -> Matrix:
    """G₁G₂ᵀ with standard Gaussian factors, scaled to unit Frobenius norm."""
    x = rng.standard_normal((d1, r)) @ rng.standard_normal((d2, r)).T
    return x / frobenius_norm(x)


def isometry_ratio(ds: SensingDataset, x: Matrix) -> float:
    """(1/M)‖A(X)‖² / ‖X‖_F²."""
    norm = frobenius_norm(x)
    if norm == 0.0:
        raise DegenerateInputError("isometry ratio of a zero matrix")
    measured = apply_operator(ds, x)
    return float(measured @ measured) / ds.N / norm**2


def rip_estimate(ds: SensingDataset, r_order: int, trials: int, seed: int) -> RipEstimate:
    if trials < 1:
        raise ConfigurationError(f"trials must be >= 1, got {trials}")
    if not 1 <= r_order <= min(ds.d1, ds.d2):
        raise ConfigurationError(f"rank order {r_order} outside [1, {min(ds.d1, ds.d2)}]")
    ratios = np.array(
        [isometry_ratio(ds, random_low_rank(derive_rng(seed, "rip", k), ds.d1, ds.d2, r_order)) for k in range(trials)]
    )
    deviations = ratios - 1.0
    estimate = RipEstimate(
        r_order=r_order,
        delta_hat=float(np.max(np.abs(deviations))),
        trials=trials,
        max_ratio_dev=float(np.max(deviations)),
    )
    if estimate.delta_hat >= 1.0:
        logger.warning("RIP estimate %.3f >= 1 at M=%d: operator is not well scaled", estimate.delta_hat, ds.N)
    return estimate


def noise_assumption_check(epsilon: Vector, nu: float, b: Optional[int] = None) -> bool:
    """‖ε‖₂ ≤ 2ν√b, with b the length of ε unless given."""
    epsilon = np.asarray(epsilon, dtype=np.float64)
    b = epsilon.shape[0] if b is None else b
    bound = 2.0 * nu * math.sqrt(b)
    return _holds(float(np.linalg.norm(epsilon)), bound, slack=IDENTITY_TOL)


def batch_noise_checks(ds: SensingDataset, nu: float) -> List[bool]:
    """The noise condition on the noise slice of every batch."""
    if ds.epsilon is None:
        raise ConfigurationError("dataset carries no realised noise")
    return [noise_assumption_check(ds.epsilon[ds.batch(i)], nu, ds.b) for i in range(ds.n)]


def contraction_rho(eta: float, m: int, summary: SpectralSummary, delta4r_prime: float) -> ContractionReport:
    """ρ = 15κ(1/(ησ₁m) + 384ησ₁(1+δ′)²)."""
    if not eta > 0 or m < 1:
        raise ConfigurationError(f"need eta > 0 and m >= 1, got eta={eta}, m={m}")
    if delta4r_prime < 0:
        raise ConfigurationError(f"delta must be non-negative, got {delta4r_prime}")
    kappa, scaled = summary.kappa, eta * summary.sigma1
    inner = 1.0 / (scaled * m)
    smoothness = RHO_SMOOTHNESS * scaled * (1.0 + delta4r_prime) ** 2
    rho = RHO_PREFACTOR * kappa * (inner + smoothness)
    regime = prescribed_step_size(summary, delta4r_prime) * summary.sigma1
    return ContractionReport(
        eta=eta,
        m=m,
        kappa=kappa,
        sigma1=summary.sigma1,
        delta4r_prime=delta4r_prime,
        rho=rho,
        rho_simplified=RHO_PREFACTOR * kappa * inner + SIMPLIFIED_OFFSET,
        rho_limit=RHO_PREFACTOR * kappa * smoothness,
        converges=rho < 1.0,
        prescribed_regime=math.isclose(scaled, regime, rel_tol=1e-9),
    )


def prescribed_step_size(summary: SpectralSummary, delta4r_prime: float) -> float:
    """η with ησ₁ = 1/(576κ(1+δ′)²)."""
    return 1.0 / (STEP_DENOMINATOR * summary.kappa * (1.0 + delta4r_prime) ** 2 * summary.sigma1)


def prescribed_inner_iterations(summary: SpectralSummary, eta: float, target: float = 5.0 / 6.0) -> int:
    """Smallest m with 15κ/(ησ₁m) + 2/3 ≤ target."""
    if target <= SIMPLIFIED_OFFSET:
        raise ConfigurationError(f"target must exceed 2/3, got {target}")
    exact = RHO_PREFACTOR * summary.kappa / (eta * summary.sigma1 * (target - SIMPLIFIED_OFFSET))
    m = math.ceil(exact - 1e-9 * exact)
    return max(m, 1)


def _sigma_r(z: FactorPair) -> float:
    svd = truncated_svd(z.stacked, z.r)
    sigma1, sigma_r = float(svd.s[0]), float(svd.s[-1])
    if sigma_r <= RANK_TOL * max(sigma1, 1.0):
        raise RankDeficiencyError(f"stacked factors do not have full column rank {z.r}")
    return sigma_r


def check_lifted_distance(z1: FactorPair, z2: FactorPair) -> InequalityCheck:
    """
    d²(Z₁,Z₂) ≤ ‖Z₁Z₁ᵀ − Z₂Z₂ᵀ‖_F² / (2(√2−1)σ_r²(Z₂)), and, when
    d(Z₁,Z₂) ≤ ‖Z₂‖₂/4, ‖Z₁Z₁ᵀ − Z₂Z₂ᵀ‖_F ≤ (9/4)‖Z₂‖₂ d(Z₁,Z₂).
    """
    sigma_r = _sigma_r(z2)
    dist = distance(z1, z2).dist
    gap = frobenius_norm(lift(z1) - lift(z2))
    lower_rhs = gap**2 / (2.0 * (math.sqrt(2.0) - 1.0) * sigma_r**2)
    lower = _holds(dist**2, lower_rhs)

    norm2 = spectral_norm(z2.stacked)
    margins = {"lower": lower_rhs - dist**2}
    upper = True
    if dist <= norm2 / 4.0:
        upper_rhs = 2.25 * norm2 * dist
        upper = _holds(gap, upper_rhs)
        margins["upper"] = upper_rhs - gap
    passed = lower and upper
    if not passed:
        logger.warning("Lifted-distance inequalities violated: %s", margins)
    return InequalityCheck(check="lifted_distance", margins=margins, passed=passed)


def check_regularizer_curvature(z: FactorPair, zstar: FactorPair) -> InequalityCheck:
    """
    ⟨Z̃Z̃ᵀZ, H⟩ ≥ ½‖Z̃ᵀZ‖_F² − ½‖Z̃ᵀZ‖_F‖H‖_F², H = Z − Z*R.

    zstar is expected to be balanced (U*ᵀU* = V*ᵀV*).
    """
    alignment = distance(z, zstar)
    signed = z.signed
    cross = signed.T @ z.stacked
    cross_norm = frobenius_norm(cross)
    lhs = frobenius_inner(signed @ cross, alignment.h)
    rhs = 0.5 * cross_norm**2 - 0.5 * cross_norm * alignment.dist**2
    passed = _holds(rhs, lhs)
    if not passed:
        logger.warning("Regularizer curvature inequality violated: lhs=%.6e rhs=%.6e", lhs, rhs)
    return InequalityCheck(check="regularizer_curvature", margins={"curvature": lhs - rhs}, passed=passed)


def inner_product_deviation(ds: SensingDataset, x: Matrix, y: Matrix, delta_hat: Optional[float] = None) -> float:
    """
    |(1/M)⟨A(X), A(Y)⟩ − ⟨X, Y⟩| / (‖X‖_F‖Y‖_F).

    A report, not an assertion: δ is only ever estimated. Exceeding the given
    estimate is logged.
    """
    norms = frobenius_norm(x) * frobenius_norm(y)
    if norms == 0.0:
        raise DegenerateInputError("inner-product deviation needs non-zero operands")
    measured = float(apply_operator(ds, x) @ apply_operator(ds, y)) / ds.N
    deviation = abs(measured - frobenius_inner(x, y)) / norms
    if delta_hat is not None and deviation > delta_hat:
        logger.info("Inner-product deviation %.4f exceeds the estimated constant %.4f", deviation, delta_hat)
    return deviation


def check_balanced_closeness(m: Matrix, m_prime: Matrix, r: int) -> InequalityCheck:
    """
    For rank-r M, M′ with ‖M − M′‖₂ ≤ σ_r(M)/2, the balanced factor pairs
    satisfy d² ≤ (2/(√2−1))‖M′ − M‖_F² / σ_r(M).
    """
    summary = SpectralSummary.from_matrix(m, r)
    difference = m_prime - m
    spectral = spectral_norm(difference)
    if spectral > summary.sigma_r / 2.0:
        return InequalityCheck(check="balanced_closeness", margins={}, passed=True, applicable=False)
    dist = distance(FactorPair.balanced(m_prime, r), FactorPair.balanced(m, r)).dist
    bound = 2.0 / (math.sqrt(2.0) - 1.0) * frobenius_norm(difference) ** 2 / summary.sigma_r
    passed = _holds(dist**2, bound)
    if not passed:
        logger.warning("Balanced-factor closeness violated: d^2=%.6e bound=%.6e", dist**2, bound)
    return InequalityCheck(check="balanced_closeness", margins={"closeness": bound - dist**2}, passed=passed)


def initialization_report(z0: FactorPair, xstar: Matrix) -> InitReport:
    r = z0.r
    summary = SpectralSummary.from_matrix(xstar, r)
    difference = z0.product - xstar
    x_error = frobenius_norm(difference)
    x_error_spectral = spectral_norm(difference)
    dist = distance(z0, FactorPair.balanced(xstar, r)).dist
    closeness_bound = None
    if x_error_spectral <= summary.sigma_r / 2.0:
        closeness_bound = 2.0 / (math.sqrt(2.0) - 1.0) * x_error**2 / summary.sigma_r
    return InitReport(
        x_error=x_error,
        x_error_spectral=x_error_spectral,
        sigma_r=summary.sigma_r,
        dist=dist,
        in_ball=dist <= math.sqrt(summary.sigma_r) / 4.0,
        closeness_bound=closeness_bound,
    )


def probe_curvature_smoothness(
    ds: SensingDataset,
    z: FactorPair,
    zstar: FactorPair,
    delta_prime: float,
) -> CurvatureReport:
    """
    Both sides of the local conditions on a noiseless dataset:

        ⟨∇f̃(Z), H⟩ ≥ (σ_r/10)‖H‖_F² + (1/8)‖X − X*‖_F² + (1/16)‖Z̃ᵀZ‖_F² − (1/3)‖H‖_F⁴
        ‖∇f̃ᵢ(Z)‖_F² ≤ (8(1+δ′)²‖X − X*‖_F² + ‖UᵀU − VᵀV‖_F²)·‖Z‖₂²   for every batch i

    with X* = U*V*ᵀ from a balanced zstar and δ′ the per-batch RIP estimate.
    """
    if not ds.noise.is_noiseless:
        raise ConfigurationError("curvature and smoothness probes need a noiseless dataset")
    if delta_prime < 0:
        raise ConfigurationError(f"delta_prime must be non-negative, got {delta_prime}")

    alignment = distance(z, zstar)
    sigma_r = SpectralSummary.from_matrix(zstar.product, zstar.r).sigma_r
    x_gap = frobenius_norm(z.product - zstar.product) ** 2
    cross_sq = frobenius_norm(z.signed.T @ z.stacked) ** 2
    imbalance_sq = frobenius_norm(z.imbalance) ** 2
    identity_gap = abs(cross_sq - imbalance_sq) / max(1.0, imbalance_sq)

    h_sq = alignment.dist**2
    lhs = frobenius_inner(grad_full(ds, z).stacked, alignment.h)
    rhs = sigma_r / 10.0 * h_sq + x_gap / 8.0 + cross_sq / 16.0 - h_sq**2 / 3.0

    z_norm_sq = spectral_norm(z.stacked) ** 2
    bound = (8.0 * (1.0 + delta_prime) ** 2 * x_gap + imbalance_sq) * z_norm_sq
    smoothness = [bound - grad_component(ds, z, i).norm() ** 2 for i in range(ds.n)]

    result = CurvatureReport(
        curvature_lhs=lhs,
        curvature_rhs=rhs,
        curvature_margin=lhs - rhs,
        smoothness_margins=smoothness,
        regularizer_identity_gap=identity_gap,
        delta_prime=delta_prime,
    )
    if not result.passed:
        logger.warning("Local condition violated: curvature margin %.3e, worst smoothness margin %.3e", result.curvature_margin, min(smoothness))
    return result


def gradient_check(ds: SensingDataset, z: FactorPair, h: float = 1e-5) -> GradientCheck:
    """Relative Frobenius deviation of grad_full from central differences of objective_full."""
    if not h > 0:
        raise ConfigurationError(f"finite-difference step must be positive, got {h}")
    stacked = z.stacked
    numeric = np.zeros_like(stacked)
    for index in np.ndindex(*stacked.shape):
        forward, backward = stacked.copy(), stacked.copy()
        forward[index] += h
        backward[index] -= h
        numeric[index] = (
            objective_full(ds, FactorPair.from_stacked(forward, z.d1))
            - objective_full(ds, FactorPair.from_stacked(backward, z.d1))
        ) / (2.0 * h)
    analytic = grad_full(ds, z).stacked
    scale = max(frobenius_norm(analytic), np.finfo(np.float64).tiny)
    deviation = frobenius_norm(analytic - numeric) / scale
    return GradientCheck(
        max_relative_deviation=deviation,
        h=h,
        entries=int(stacked.size),
        details={"analytic_norm": frobenius_norm(analytic), "numeric_norm": frobenius_norm(numeric)},
    )


def random_factor_pair(rng: np.random.Generator, d1: int, d2: int, r: int) -> FactorPair:
    return FactorPair(rng.standard_normal((d1, r)), rng.standard_normal((d2, r)))


def _summarise(checks: List[InequalityCheck], key: str) -> Dict[str, Any]:
    applicable = [check for check in checks if check.applicable and key in check.margins]
    margins = [check.margins[key] for check in applicable]
    return {
        "instances": len(checks),
        "applicable": len(applicable),
        "violations": sum(1 for check in applicable if not check.passed),
        "worst_margin": min(margins) if margins else None,
    }


def inequality_suite(trials: int, seed: int, d1: int = 6, d2: int = 5, r: int = 2) -> Dict[str, Dict[str, Any]]:
    """
    The deterministic inequalities on `trials` random instances each:
    regularizer curvature against a balanced Z*, balanced-factor closeness
    under rank-r perturbations, and the lifted-distance pair.
    """
    if trials < 1:
        raise ConfigurationError(f"trials must be >= 1, got {trials}")
    curvature, closeness, lifted = [], [], []
    for k in range(trials):
        rng = derive_rng(seed, "inequalities", k)
        zstar = FactorPair.balanced(random_factor_pair(rng, d1, d2, r).product, r)
        curvature.append(check_regularizer_curvature(random_factor_pair(rng, d1, d2, r), zstar))

        base = random_factor_pair(rng, d1, d2, r)
        scale = 0.05 * rng.uniform()
        moved = FactorPair(
            base.u + scale * rng.standard_normal((d1, r)),
            base.v + scale * rng.standard_normal((d2, r)),
        )
        closeness.append(check_balanced_closeness(base.product, moved.product, r))

        z2 = random_factor_pair(rng, d1, d2, r)
        perturbation = rng.standard_normal(z2.stacked.shape)
        step = 0.3 * rng.uniform() * spectral_norm(z2.stacked) / frobenius_norm(perturbation)
        z1 = FactorPair.from_stacked(z2.stacked + step * perturbation, d1)
        lifted.append(check_lifted_distance(z1, z2))

    return {
        "regularizer_curvature": _summarise(curvature, "curvature"),
        "balanced_closeness": _summarise(closeness, "closeness"),
        "lifted_distance_lower": _summarise(lifted, "lower"),
        "lifted_distance_upper": _summarise(lifted, "upper"),
    }


def probe_suite(
    probes: int,
    seed: int,
    d1: int = 20,
    d2: int = 15,
    r: int = 2,
    ratio: float = 50.0,
    radius: float = 0.2,
    rip_trials: int = 200,
) -> Dict[str, Any]:
    """
    Local curvature and smoothness on a noiseless instance with N = ratio·r·max(d1, d2)
    measurements in a single batch, at `probes` random points of the ball
    B(radius·√σ_r) around the rotation orbit of Z*.
    `precondition_met` records whether the estimated RIP level is below
    RIP_PRECONDITION; the probes run either way.
    """
    if probes < 1:
        raise ConfigurationError(f"probes must be >= 1, got {probes}")
    rng = derive_rng(seed, "probe-instance")
    xstar = rng.standard_normal((d1, r)) @ rng.standard_normal((d2, r)).T
    N = int(round(ratio * r * max(d1, d2)))
    ds = generate_dataset(EnsembleSpec(d1, d2), xstar, N, N, NoiseSpec.none(), derive_seed(seed, "probe-dataset"))
    order = min(4 * r, d1, d2)
    delta = rip_estimate(ds, order, rip_trials, derive_seed(seed, "probe-rip")).delta_hat
    zstar = FactorPair.balanced(xstar, r)
    sigma_r = SpectralSummary.from_matrix(xstar, r).sigma_r

    reports = []
    for k in range(probes):
        point_rng = derive_rng(seed, "probe", k)
        direction = point_rng.standard_normal((d1 + d2, r))
        length = radius * math.sqrt(sigma_r) * point_rng.uniform()
        start = zstar.rotated(random_orthogonal(point_rng, r))
        z = FactorPair.from_stacked(start.stacked + length * direction / frobenius_norm(direction), d1)
        reports.append(probe_curvature_smoothness(ds, z, zstar, delta))

    return {
        "N": N,
        "delta_hat": delta,
        "rip_order": order,
        "precondition_met": bool(delta < RIP_PRECONDITION),
        "probes": probes,
        "curvature_violations": sum(1 for item in reports if not item.curvature_holds),
        "smoothness_violations": sum(1 for item in reports if not item.smoothness_holds),
        "worst_curvature_margin": min(item.curvature_margin for item in reports),
        "worst_smoothness_margin": min(min(item.smoothness_margins) for item in reports),
    }
