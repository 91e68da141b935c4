"""
Regularized factorized objective.

    f(U, V)  = L(UVᵀ) + (1/8)‖UᵀU − VᵀV‖_F²,   L(X) = (1/2N) Σᵢ (⟨Aᵢ, X⟩ − yᵢ)²
    fᵢ(U, V) = ℓᵢ(UVᵀ) + (1/8)‖UᵀU − VᵀV‖_F²,  ℓᵢ(X) = (1/2b) Σ_{j ∈ batch i} (⟨Aⱼ, X⟩ − yⱼ)²

so that L = (1/n) Σᵢ ℓᵢ and f = (1/n) Σᵢ fᵢ. Every component carries the full
regularizer.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from recovery.exceptions import DegenerateInputError, DimensionMismatchError
from recovery.utils.dense_core import Matrix, Vector, as_matrix, balanced_factors, frobenius_norm
from recovery.utils.sensing import IndexRange, SensingDataset, apply_adjoint, apply_operator


@dataclass(frozen=True, eq=False)
class FactorPair:
    """Z = [U; V] with U ∈ ℝ^{d1×r}, V ∈ ℝ^{d2×r}."""

    u: Matrix
    v: Matrix

    def __post_init__(self):
        if self.u.ndim != 2 or self.v.ndim != 2 or self.u.shape[1] != self.v.shape[1]:
            raise DimensionMismatchError(f"factor shapes {self.u.shape} and {self.v.shape} do not share a rank")

    @classmethod
    def from_stacked(cls, z: Matrix, d1: int) -> "FactorPair":
        return cls(z[:d1].copy(), z[d1:].copy())

    @classmethod
    def balanced(cls, x: Matrix, r: int) -> "FactorPair":
        """Balanced split of the best rank-r approximation of x."""
        u, v = balanced_factors(as_matrix(x), r)
        return cls(u, v)

    @property
    def r(self) -> int:
        return int(self.u.shape[1])

    @property
    def d1(self) -> int:
        return int(self.u.shape[0])

    @property
    def d2(self) -> int:
        return int(self.v.shape[0])

    @property
    def stacked(self) -> Matrix:
        return np.vstack([self.u, self.v])

    @property
    def signed(self) -> Matrix:
        """Z̃ = [U; −V]; Z̃ᵀZ = UᵀU − VᵀV."""
        return np.vstack([self.u, -self.v])

    @property
    def product(self) -> Matrix:
        """X = UVᵀ."""
        return self.u @ self.v.T

    @property
    def imbalance(self) -> Matrix:
        """UᵀU − VᵀV."""
        return self.u.T @ self.u - self.v.T @ self.v

    def rotated(self, rotation: Matrix) -> "FactorPair":
        return FactorPair(self.u @ rotation, self.v @ rotation)

    def step(self, direction: "GradientPair", eta: float) -> "FactorPair":
        """Z − η·direction."""
        return FactorPair(self.u - eta * direction.gu, self.v - eta * direction.gv)

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.u)) and np.all(np.isfinite(self.v)))


@dataclass(frozen=True, eq=False)
class GradientPair:
    gu: Matrix
    gv: Matrix

    @property
    def stacked(self) -> Matrix:
        return np.vstack([self.gu, self.gv])

    def __add__(self, other: "GradientPair") -> "GradientPair":
        return GradientPair(self.gu + other.gu, self.gv + other.gv)

    def __sub__(self, other: "GradientPair") -> "GradientPair":
        return GradientPair(self.gu - other.gu, self.gv - other.gv)

    def scaled(self, alpha: float) -> "GradientPair":
        return GradientPair(alpha * self.gu, alpha * self.gv)

    def norm(self) -> float:
        return float(np.sqrt(frobenius_norm(self.gu) ** 2 + frobenius_norm(self.gv) ** 2))


def _check_dims(ds: SensingDataset, z: FactorPair) -> None:
    if (z.d1, z.d2) != (ds.d1, ds.d2):
        raise DimensionMismatchError(f"factors give a {z.d1}x{z.d2} matrix, measurements are {ds.d1}x{ds.d2}")


def residuals(ds: SensingDataset, z: FactorPair, index_range: IndexRange = None) -> Vector:
    """⟨Aᵢ, UVᵀ⟩ − yᵢ over the range."""
    _check_dims(ds, z)
    window = ds.resolve(index_range)
    return apply_operator(ds, z.product, window) - ds.y[window]


def _loss(ds: SensingDataset, z: FactorPair, window: slice) -> float:
    r = residuals(ds, z, window)
    return float(r @ r) / (2 * r.shape[0])


def loss_full(ds: SensingDataset, z: FactorPair) -> float:
    return _loss(ds, z, ds.resolve(None))


def loss_component(ds: SensingDataset, z: FactorPair, i: int) -> float:
    return _loss(ds, z, ds.batch(i))


def regularizer(z: FactorPair) -> float:
    """(1/8)‖UᵀU − VᵀV‖_F²."""
    return frobenius_norm(z.imbalance) ** 2 / 8


def objective_full(ds: SensingDataset, z: FactorPair) -> float:
    return loss_full(ds, z) + regularizer(z)


def objective_component(ds: SensingDataset, z: FactorPair, i: int) -> float:
    return loss_component(ds, z, i) + regularizer(z)


def loss_gradient_matrix(ds: SensingDataset, x: Matrix, index_range: IndexRange = None) -> Matrix:
    """∇L restricted to the range at X: (1/|range|) Σ (⟨Aᵢ, X⟩ − yᵢ) Aᵢ."""
    window = ds.resolve(index_range)
    r = apply_operator(ds, x, window) - ds.y[window]
    return apply_adjoint(ds, r, window) / r.shape[0]


def _loss_gradient(ds: SensingDataset, z: FactorPair, window: slice) -> GradientPair:
    _check_dims(ds, z)
    g = loss_gradient_matrix(ds, z.product, window)
    return GradientPair(g @ z.v, g.T @ z.u)


def grad_regularizer(z: FactorPair) -> GradientPair:
    """(½U(UᵀU − VᵀV), ½V(VᵀV − UᵀU))."""
    d = z.imbalance
    return GradientPair(0.5 * z.u @ d, -0.5 * z.v @ d)


def grad_loss_full(ds: SensingDataset, z: FactorPair) -> GradientPair:
    """(∇_U L(UVᵀ), ∇_V L(UVᵀ)), the snapshot gradient of the SVRG epoch."""
    return _loss_gradient(ds, z, ds.resolve(None))


def grad_full(ds: SensingDataset, z: FactorPair) -> GradientPair:
    return grad_loss_full(ds, z) + grad_regularizer(z)


def grad_loss_component(ds: SensingDataset, z: FactorPair, i: int) -> GradientPair:
    return _loss_gradient(ds, z, ds.batch(i))


def grad_component(ds: SensingDataset, z: FactorPair, i: int) -> GradientPair:
    return grad_loss_component(ds, z, i) + grad_regularizer(z)


def relative_error(x: Matrix, reference: Optional[Matrix]) -> float:
    """‖x − X*‖_F² / ‖X*‖_F², NaN when no reference is known."""
    if reference is None:
        return float("nan")
    scale = frobenius_norm(reference)
    if scale == 0.0:
        raise DegenerateInputError("relative error is undefined for a zero reference")
    return frobenius_norm(x - reference) ** 2 / scale ** 2
