"""
Solvers for the factorized objective.

    init_projected_gd  projected gradient descent on X with rank-r truncation,
                       followed by a balanced split into (U, V)
    svrg_solve         stochastic variance-reduced gradient epochs
    gd_solve           plain full-gradient descent, the baseline
"""

import logging
import math
from dataclasses import asdict, dataclass, field
from enum import Enum
from pathlib import Path
from typing import List, Optional, Tuple, Union

import numpy as np
import pandas as pd

from recovery.exceptions import ConfigurationError, DegenerateInputError, DivergenceError
from recovery.utils.dense_core import Matrix, best_rank_approximation, spectral_norm
from recovery.utils.diagnostics import distance
from recovery.utils.objective import (
    FactorPair,
    GradientPair,
    grad_component,
    grad_full,
    grad_loss_component,
    grad_loss_full,
    loss_gradient_matrix,
    objective_full,
    relative_error,
)
from recovery.utils.seeds import derive_rng
from recovery.utils.sensing import SensingDataset

logger = logging.getLogger(__name__)

DEFAULT_ETA_SCALE = 0.1
DEFAULT_TAU = 0.5
DEFAULT_S_INIT = 15

TRACE_COLUMNS = ["epoch", "data_passes", "objective", "rel_error", "dist"]
CSV_FLOAT_FORMAT = "%.10e"


class OutputPolicy(str, Enum):
    RANDOM_T = "random_t"
    LAST_ITERATE = "last_iterate"


@dataclass(frozen=True)
class SolverConfig:
    """
    Knobs of the SVRG solver.

    eta may be 0 (a null step, every iterate equals the start); negative step
    sizes are rejected.
    """

    eta: float
    m: int
    S: int
    output_policy: OutputPolicy = OutputPolicy.RANDOM_T
    seed: int = 0
    tol_stop: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "output_policy", OutputPolicy(self.output_policy))
        if not math.isfinite(self.eta) or self.eta < 0:
            raise ConfigurationError(f"step size eta must be a non-negative number, got {self.eta}")
        if self.m < 1:
            raise ConfigurationError(f"inner iterations m must be >= 1, got {self.m}")
        if self.S < 1:
            raise ConfigurationError(f"epochs S must be >= 1, got {self.S}")
        if self.tol_stop is not None and self.tol_stop <= 0:
            raise ConfigurationError(f"tol_stop must be positive when set, got {self.tol_stop}")


@dataclass(frozen=True)
class InitConfig:
    r: int
    tau: float = DEFAULT_TAU
    S_init: int = DEFAULT_S_INIT

    def __post_init__(self):
        if self.r < 1:
            raise ConfigurationError(f"rank r must be >= 1, got {self.r}")
        if not self.tau > 0:
            raise ConfigurationError(f"step size tau must be positive, got {self.tau}")
        if self.S_init < 1:
            raise ConfigurationError(f"S_init must be >= 1, got {self.S_init}")


@dataclass(frozen=True)
class TraceRecord:
    epoch: int
    data_passes: float
    objective: float
    rel_error: float
    dist: float


@dataclass
class SolveTrace:
    """Per-epoch progress; entry 0 is the starting point at zero data passes."""

    algorithm: str
    records: List[TraceRecord] = field(default_factory=list)

    def append(self, record: TraceRecord) -> None:
        if self.records and record.data_passes <= self.records[-1].data_passes:
            raise ValueError("data passes must increase strictly along a trace")
        self.records.append(record)

    @property
    def data_passes(self) -> List[float]:
        return [record.data_passes for record in self.records]

    @property
    def rel_errors(self) -> List[float]:
        return [record.rel_error for record in self.records]

    @property
    def final_rel_error(self) -> float:
        return self.records[-1].rel_error

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([asdict(record) for record in self.records], columns=TRACE_COLUMNS)

    def to_csv(self, path: Union[str, Path]) -> None:
        self.to_frame().to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT, na_rep="nan")


def epoch_data_passes(m: int, b: int, N: int) -> float:
    """One snapshot pass plus m inner steps touching b measurements each."""
    return 1.0 + m * b / N


def default_step_size(z0: FactorPair, scale: float = DEFAULT_ETA_SCALE) -> float:
    """η = scale / σ̂₁ with σ̂₁ the spectral norm of U⁰V⁰ᵀ."""
    sigma1 = spectral_norm(z0.product)
    if sigma1 == 0.0:
        raise DegenerateInputError("cannot derive a step size from a zero initial iterate")
    return scale / sigma1


def init_projected_gd(ds: SensingDataset, cfg: InitConfig) -> FactorPair:
    """
    X₀ = 0, X_s = P_r[X_{s−1} − τ∇L(X_{s−1})] for s = 1..S_init, then split
    X_S = Ū Σ V̄ᵀ into (Ū Σ^{1/2}, V̄ Σ^{1/2}).
    """
    if cfg.r > min(ds.d1, ds.d2):
        raise ConfigurationError(f"rank {cfg.r} exceeds min(d1, d2) = {min(ds.d1, ds.d2)}")
    logger.info("Initialization: rank=%d tau=%.4e S_init=%d", cfg.r, cfg.tau, cfg.S_init)
    x = np.zeros((ds.d1, ds.d2))
    for s in range(1, cfg.S_init + 1):
        stepped = x - cfg.tau * loss_gradient_matrix(ds, x)
        if not np.all(np.isfinite(stepped)):
            raise DivergenceError("initialization iterate is not finite", epoch=s)
        x = best_rank_approximation(stepped, cfg.r)
    logger.debug("Initialization finished after %d projected steps (tau=%g)", cfg.S_init, cfg.tau)
    return FactorPair.balanced(x, cfg.r)


def variance_reduced_direction(
    ds: SensingDataset,
    z: FactorPair,
    snapshot: FactorPair,
    snapshot_gradient: GradientPair,
    i: int,
) -> GradientPair:
    """∇fᵢ(Z) − ∇ℓᵢ(ŨṼᵀ) + G̃, an unbiased estimate of ∇f(Z) over i."""
    return grad_component(ds, z, i) - grad_loss_component(ds, snapshot, i) + snapshot_gradient


class _TraceRecorder:
    def __init__(self, algorithm: str, ds: SensingDataset, reference: Optional[Matrix], zstar: Optional[FactorPair]):
        self.trace = SolveTrace(algorithm)
        self.ds = ds
        self.reference = reference
        self.zstar = zstar

    def record(self, epoch: int, passes: float, z: FactorPair) -> TraceRecord:
        dist = distance(z, self.zstar).dist if self.zstar is not None else float("nan")
        entry = TraceRecord(
            epoch=epoch,
            data_passes=passes,
            objective=objective_full(self.ds, z),
            rel_error=relative_error(z.product, self.reference),
            dist=dist,
        )
        self.trace.append(entry)
        return entry

    def converged(self, entry: TraceRecord, z: FactorPair, tol_stop: Optional[float]) -> bool:
        if tol_stop is None:
            return False
        if self.reference is not None:
            return entry.rel_error <= tol_stop
        return grad_full(self.ds, z).norm() <= tol_stop


def _resolve_truth(z0: FactorPair, reference: Optional[Matrix], zstar: Optional[FactorPair]) -> Optional[FactorPair]:
    if zstar is None and reference is not None:
        return FactorPair.balanced(reference, z0.r)
    return zstar


def svrg_solve(
    ds: SensingDataset,
    z0: FactorPair,
    cfg: SolverConfig,
    reference: Optional[Matrix] = None,
    zstar: Optional[FactorPair] = None,
) -> Tuple[FactorPair, SolveTrace]:
    """
    Run S SVRG epochs from z0.

    Each epoch takes the loss-only full gradient G̃ at the snapshot, makes m
    inner steps Z ← Z − η(∇f_{i_t}(Z) − ∇ℓ_{i_t}(ŨṼᵀ) + G̃) with i_t drawn
    uniformly with replacement, and hands the iterate chosen by
    `cfg.output_policy` to the next epoch. For random_t the index t* is drawn
    at the start of the epoch. `reference` (X*) and `zstar` (Z*) only feed
    the trace.
    """
    if (z0.d1, z0.d2) != (ds.d1, ds.d2):
        raise ConfigurationError(f"initial factors give {z0.d1}x{z0.d2}, measurements are {ds.d1}x{ds.d2}")
    if ds.n < 1:
        raise ConfigurationError("cannot run SVRG on an empty dataset")

    logger.info("SVRG: eta=%.4e m=%d S=%d output=%s", cfg.eta, cfg.m, cfg.S, cfg.output_policy.value)
    rng = derive_rng(cfg.seed, "svrg")
    recorder = _TraceRecorder("svrg", ds, reference, _resolve_truth(z0, reference, zstar))
    recorder.record(0, 0.0, z0)
    per_epoch = epoch_data_passes(cfg.m, ds.b, ds.N)

    snapshot = z0
    for s in range(1, cfg.S + 1):
        snapshot_gradient = grad_loss_full(ds, snapshot)
        capture_at = int(rng.integers(cfg.m)) if cfg.output_policy is OutputPolicy.RANDOM_T else cfg.m
        output = snapshot if capture_at == 0 else None

        z = snapshot
        for t in range(cfg.m):
            i = int(rng.integers(ds.n))
            z = z.step(variance_reduced_direction(ds, z, snapshot, snapshot_gradient, i), cfg.eta)
            if not z.is_finite():
                raise DivergenceError("SVRG iterate is not finite", epoch=s, step=t + 1)
            if t + 1 == capture_at:
                output = z

        snapshot = output
        entry = recorder.record(s, s * per_epoch, snapshot)
        logger.debug("SVRG epoch %d: objective=%.6e rel_error=%.6e", s, entry.objective, entry.rel_error)
        if recorder.converged(entry, snapshot, cfg.tol_stop):
            logger.info("SVRG stopped early at epoch %d", s)
            break

    return snapshot, recorder.trace


def gd_solve(
    ds: SensingDataset,
    z0: FactorPair,
    eta: float,
    T: int,
    reference: Optional[Matrix] = None,
    zstar: Optional[FactorPair] = None,
    tol_stop: Optional[float] = None,
) -> Tuple[FactorPair, SolveTrace]:
    """T full-gradient steps Z ← Z − η∇f(Z); one trace entry per iteration."""
    if not math.isfinite(eta) or eta < 0:
        raise ConfigurationError(f"step size eta must be a non-negative number, got {eta}")
    if T < 1:
        raise ConfigurationError(f"iteration count T must be >= 1, got {T}")
    if (z0.d1, z0.d2) != (ds.d1, ds.d2):
        raise ConfigurationError(f"initial factors give {z0.d1}x{z0.d2}, measurements are {ds.d1}x{ds.d2}")

    logger.info("Gradient descent: eta=%.4e T=%d", eta, T)
    recorder = _TraceRecorder("gd", ds, reference, _resolve_truth(z0, reference, zstar))
    recorder.record(0, 0.0, z0)
    z = z0
    for t in range(1, T + 1):
        z = z.step(grad_full(ds, z), eta)
        if not z.is_finite():
            raise DivergenceError("gradient descent iterate is not finite", epoch=t)
        entry = recorder.record(t, float(t), z)
        if recorder.converged(entry, z, tol_stop):
            logger.info("Gradient descent stopped early at iteration %d", t)
            break
    return z, recorder.trace
