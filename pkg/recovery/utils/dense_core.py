"""
Dense linear algebra for the recovery library.

Matrices are two-dimensional float64 numpy arrays in C order. Every function
in this module is pure and never modifies its inputs.
"""

import logging
from dataclasses import dataclass
from typing import Tuple

import numpy as np
import numpy.typing as npt

from recovery.exceptions import (
    ConfigurationError,
    ConvergenceError,
    DimensionMismatchError,
    NumericalError,
)

logger = logging.getLogger(__name__)

Matrix = npt.NDArray[np.float64]
Vector = npt.NDArray[np.float64]

DEFAULT_SVD_TOL = 1e-10
DEFAULT_SVD_MAX_ITER = 1000
DEFAULT_NORM_TOL = 1e-12
DEFAULT_NORM_MAX_ITER = 10000
OVERSAMPLING = 4


def as_matrix(data, name: str = "matrix") -> Matrix:
    """Validate `data` as a finite two-dimensional float64 matrix."""
    matrix = np.ascontiguousarray(data, dtype=np.float64)
    if matrix.ndim != 2 or matrix.shape[0] < 1 or matrix.shape[1] < 1:
        raise DimensionMismatchError(f"{name} must be a non-empty 2-D array, got shape {matrix.shape}")
    if not np.all(np.isfinite(matrix)):
        raise NumericalError(f"{name} contains non-finite entries")
    return matrix


def matmul(a: Matrix, b: Matrix) -> Matrix:
    """Matrix product a·b."""
    if a.shape[1] != b.shape[0]:
        raise DimensionMismatchError(f"cannot multiply {a.shape} by {b.shape}")
    return a @ b


def frobenius_inner(a: Matrix, b: Matrix) -> float:
    """Trace inner product ⟨a, b⟩ = Tr(aᵀb)."""
    if a.shape != b.shape:
        raise DimensionMismatchError(f"inner product of {a.shape} and {b.shape}")
    return float(np.vdot(a, b))


def frobenius_norm(a: Matrix) -> float:
    return float(np.linalg.norm(a))


@dataclass(frozen=True)
class SvdTriplet:
    """Top-k singular triplets: u (rows×k), s (k, non-increasing), v (cols×k)."""

    u: Matrix
    s: Vector
    v: Matrix

    @property
    def k(self) -> int:
        return int(self.s.shape[0])

    def reconstruct(self) -> Matrix:
        """u·diag(s)·vᵀ."""
        return (self.u * self.s) @ self.v.T


def _orthonormal_basis(block: Matrix) -> Matrix:
    q, _ = np.linalg.qr(block)
    return q


def _fix_signs(u: Matrix, v: Matrix) -> Tuple[Matrix, Matrix]:
    # First nonzero entry of every left vector is made positive.
    u = u.copy()
    v = v.copy()
    for j in range(u.shape[1]):
        column = u[:, j]
        threshold = 1e-14 * max(float(np.max(np.abs(column))), np.finfo(np.float64).tiny)
        nonzero = np.flatnonzero(np.abs(column) > threshold)
        if nonzero.size and column[nonzero[0]] < 0:
            u[:, j] = -column
            v[:, j] = -v[:, j]
    return u, v


def truncated_svd(
    a: Matrix,
    k: int,
    tol: float = DEFAULT_SVD_TOL,
    max_iter: int = DEFAULT_SVD_MAX_ITER,
    seed: int = 0,
) -> SvdTriplet:
    """
    Top-k singular triplets by subspace iteration.

    The iteration runs on a block of width k + OVERSAMPLING started from a
    seeded Gaussian matrix, with a Rayleigh-Ritz extraction on every sweep.
    It stops once the relative change of the k leading singular values and
    the relative Ritz residual ‖A v − u diag(s)‖_F / ‖A‖_F both fall below
    `tol`.

    Raises:
        DimensionMismatchError: k outside [1, min(rows, cols)].
        ConvergenceError: tolerance not met after max_iter sweeps.
    """
    a = as_matrix(a)
    rows, cols = a.shape
    if not 1 <= k <= min(rows, cols):
        raise DimensionMismatchError(f"rank {k} outside [1, {min(rows, cols)}] for shape {a.shape}")
    if tol <= 0:
        raise ConfigurationError(f"tol must be positive, got {tol}")

    width = min(k + OVERSAMPLING, rows, cols)
    exact = width == min(rows, cols)
    scale = frobenius_norm(a) or 1.0

    rng = np.random.default_rng(seed)
    q = _orthonormal_basis(a @ rng.standard_normal((cols, width)))
    previous = None
    residual = np.inf

    for iteration in range(1, max_iter + 1):
        if iteration > 1 or not exact:
            q = _orthonormal_basis(a @ _orthonormal_basis(a.T @ q))
        ub, s, vbt = np.linalg.svd(q.T @ a, full_matrices=False)
        u = q @ ub[:, :k]
        s = s[:k]
        v = vbt[:k].T
        residual = frobenius_norm(a @ v - u * s) / scale

        if exact:
            break
        if previous is not None:
            change = float(np.max(np.abs(s - previous))) / max(float(previous[0]), np.finfo(np.float64).tiny)
            if change <= tol and residual <= tol:
                break
        previous = s
    else:
        raise ConvergenceError("truncated_svd did not converge", residual=residual, iterations=max_iter)

    u, v = _fix_signs(u, v)
    return SvdTriplet(u=u, s=np.clip(s, 0.0, None), v=v)


def spectral_norm(
    a: Matrix,
    tol: float = DEFAULT_NORM_TOL,
    max_iter: int = DEFAULT_NORM_MAX_ITER,
    seed: int = 0,
) -> float:
    """Largest singular value by power iteration on aᵀa."""
    a = as_matrix(a)
    if tol <= 0:
        raise ConfigurationError(f"tol must be positive, got {tol}")
    if not np.any(a):
        return 0.0

    x = np.random.default_rng(seed).standard_normal(a.shape[1])
    x /= np.linalg.norm(x)
    estimate = 0.0
    sigma = 0.0
    for _ in range(max_iter):
        y = a @ x
        sigma = float(np.linalg.norm(y))
        back = a.T @ y
        norm = float(np.linalg.norm(back))
        if norm == 0.0:
            return sigma
        x = back / norm
        if abs(sigma - estimate) <= tol * sigma:
            return sigma
        estimate = sigma
    raise ConvergenceError("spectral_norm did not converge", residual=abs(sigma - estimate) / sigma, iterations=max_iter)


def procrustes_rotation(z: Matrix, zstar: Matrix) -> Matrix:
    """
    Orthogonal R minimising ‖z − zstar·R‖_F.

    With zstarᵀz = P·D·Qᵀ the minimiser is R = P·Qᵀ.
    """
    if z.shape != zstar.shape:
        raise DimensionMismatchError(f"procrustes operands {z.shape} and {zstar.shape} differ")
    cross = zstar.T @ z
    svd = truncated_svd(cross, cross.shape[0])
    return svd.u @ svd.v.T


def best_rank_approximation(a: Matrix, r: int) -> Matrix:
    """P_r(a): best rank-r approximation in Frobenius norm."""
    return truncated_svd(a, r).reconstruct()


def balanced_factors(x: Matrix, r: int) -> Tuple[Matrix, Matrix]:
    """Split X ≈ Ū Σ V̄ᵀ into (Ū Σ^{1/2}, V̄ Σ^{1/2})."""
    svd = truncated_svd(x, r)
    root = np.sqrt(svd.s)
    return svd.u * root, svd.v * root


def random_orthogonal(rng: np.random.Generator, r: int) -> Matrix:
    """Haar-distributed r×r orthogonal matrix."""
    q, upper = np.linalg.qr(rng.standard_normal((r, r)))
    return q * np.sign(np.diag(upper))


def orthonormality_error(q: Matrix) -> float:
    """‖qᵀq − I‖_F."""
    return frobenius_norm(q.T @ q - np.eye(q.shape[1]))


def subspace_distance(a: Matrix, b: Matrix) -> float:
    """Frobenius distance between the orthogonal projectors onto span(a) and span(b)."""
    return frobenius_norm(a @ a.T - b @ b.T)
