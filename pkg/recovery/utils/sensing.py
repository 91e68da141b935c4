"""
Linear measurement model y = A_N(X*) + ε.

A SensingDataset owns the stacked sensing matrices (an (N, d1, d2) array),
the observations, the realised noise and the fixed partition of the N
measurements into n contiguous batches of b measurements.
"""

import json
import logging
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path
from typing import List, Optional, Union

import numpy as np

from recovery.exceptions import (
    ConfigurationError,
    DimensionMismatchError,
    FormatError,
    IndexRangeError,
)
from recovery.utils.dense_core import Matrix, Vector, as_matrix
from recovery.utils.lrmx import read_lrmx, read_lrmx_stack, write_lrmx, write_lrmx_stack
from recovery.utils.seeds import GENERATOR_VERSION, derive_rng

logger = logging.getLogger(__name__)

IndexRange = Union[range, slice, None]

MANIFEST_NAME = "manifest.json"
MATRICES_NAME = "matrices.lrmx"
OBSERVATIONS_NAME = "y.lrmx"
NOISE_NAME = "epsilon.lrmx"
TRUTH_NAME = "xstar.lrmx"


class EnsembleKind(str, Enum):
    GAUSSIAN_IID = "gaussian_iid"
    GAUSSIAN_DIAG2 = "gaussian_diag2"
    RADEMACHER = "rademacher"


class NoiseKind(str, Enum):
    NONE = "none"
    GAUSSIAN = "gaussian"


@dataclass(frozen=True)
class EnsembleSpec:
    """Distribution of the entries of every sensing matrix Aᵢ ∈ ℝ^{d1×d2}."""

    d1: int
    d2: int
    kind: EnsembleKind = EnsembleKind.GAUSSIAN_IID

    def __post_init__(self):
        object.__setattr__(self, "kind", EnsembleKind(self.kind))
        if self.d1 < 1 or self.d2 < 1:
            raise ConfigurationError(f"ensemble dimensions must be positive, got {self.d1}x{self.d2}")

    def sample(self, rng: np.random.Generator, count: int) -> np.ndarray:
        shape = (count, self.d1, self.d2)
        if self.kind is EnsembleKind.RADEMACHER:
            return rng.integers(0, 2, size=shape).astype(np.float64) * 2.0 - 1.0
        matrices = rng.standard_normal(shape)
        if self.kind is EnsembleKind.GAUSSIAN_DIAG2:
            diagonal = np.arange(min(self.d1, self.d2))
            matrices[:, diagonal, diagonal] *= np.sqrt(2.0)
        return matrices


@dataclass(frozen=True)
class NoiseSpec:
    """Observation noise; `sigma` doubles as the sub-Gaussian parameter ν."""

    kind: NoiseKind = NoiseKind.NONE
    sigma: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "kind", NoiseKind(self.kind))
        if self.sigma < 0:
            raise ConfigurationError(f"noise sigma must be non-negative, got {self.sigma}")

    @classmethod
    def none(cls) -> "NoiseSpec":
        return cls(NoiseKind.NONE, 0.0)

    @classmethod
    def gaussian(cls, sigma: float) -> "NoiseSpec":
        return cls(NoiseKind.GAUSSIAN, sigma)

    @property
    def is_noiseless(self) -> bool:
        return self.kind is NoiseKind.NONE or self.sigma == 0.0

    def sample(self, rng: np.random.Generator, count: int) -> Vector:
        if self.kind is NoiseKind.NONE:
            return np.zeros(count)
        return self.sigma * rng.standard_normal(count)


@dataclass(frozen=True, eq=False)
class SensingDataset:
    matrices: np.ndarray
    y: Vector
    b: int
    ensemble: EnsembleSpec
    noise: NoiseSpec
    seed: int
    epsilon: Optional[Vector] = None
    xstar: Optional[Matrix] = None

    def __post_init__(self):
        if self.matrices.ndim != 3:
            raise DimensionMismatchError(f"sensing matrices must be stacked as (N, d1, d2), got {self.matrices.shape}")
        count, d1, d2 = self.matrices.shape
        if count < 1:
            raise ConfigurationError("a dataset needs at least one measurement")
        if (d1, d2) != (self.ensemble.d1, self.ensemble.d2):
            raise DimensionMismatchError(f"matrices are {d1}x{d2} but the ensemble is {self.ensemble.d1}x{self.ensemble.d2}")
        if self.y.shape != (count,):
            raise DimensionMismatchError(f"{count} matrices but {self.y.shape[0]} observations")
        if self.epsilon is not None and self.epsilon.shape != (count,):
            raise DimensionMismatchError(f"{count} matrices but {self.epsilon.shape[0]} noise values")
        if self.b < 1 or count % self.b:
            raise ConfigurationError(f"batch size {self.b} does not divide N = {count}")

    @property
    def N(self) -> int:
        return int(self.matrices.shape[0])

    @property
    def n(self) -> int:
        return self.N // self.b

    @property
    def d1(self) -> int:
        return int(self.matrices.shape[1])

    @property
    def d2(self) -> int:
        return int(self.matrices.shape[2])

    @property
    def rank(self) -> Optional[int]:
        """Rank of X*, None when the ground truth is not stored."""
        if self.xstar is None:
            return None
        return int(np.linalg.matrix_rank(self.xstar))

    @property
    def partition(self) -> List[range]:
        return [range(j * self.b, (j + 1) * self.b) for j in range(self.n)]

    def batch(self, i: int) -> slice:
        if not 0 <= i < self.n:
            raise IndexRangeError(f"batch index {i} outside [0, {self.n})")
        return slice(i * self.b, (i + 1) * self.b)

    def resolve(self, index_range: IndexRange) -> slice:
        """Turn a range/slice (None meaning all measurements) into a checked slice."""
        if index_range is None:
            return slice(0, self.N)
        if isinstance(index_range, range):
            if index_range.step != 1:
                raise IndexRangeError("measurement ranges must be contiguous")
            index_range = slice(index_range.start, index_range.stop)
        start = 0 if index_range.start is None else index_range.start
        stop = self.N if index_range.stop is None else index_range.stop
        if index_range.step not in (None, 1) or not 0 <= start < stop <= self.N:
            raise IndexRangeError(f"range [{start}, {stop}) outside [0, {self.N})")
        return slice(start, stop)

    def with_batch_size(self, b: int) -> "SensingDataset":
        """Same measurements, partitioned into batches of size b."""
        return replace(self, b=b)

    def batch_view(self, i: int) -> "SensingDataset":
        """The sub-operator of batch i as a single-batch dataset."""
        window = self.batch(i)
        epsilon = None if self.epsilon is None else self.epsilon[window]
        return replace(self, matrices=self.matrices[window], y=self.y[window], epsilon=epsilon)


def _frozen(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


def generate_dataset(
    spec: EnsembleSpec,
    xstar: Matrix,
    N: int,
    b: int,
    noise: NoiseSpec,
    seed: int,
) -> SensingDataset:
    """
    Sample N sensing matrices and observations yᵢ = ⟨Aᵢ, X*⟩ + εᵢ.

    Matrices and noise come from independent streams derived from `seed`, so
    the same arguments always give a bit-identical dataset.
    """
    xstar = as_matrix(xstar, name="xstar")
    if xstar.shape != (spec.d1, spec.d2):
        raise DimensionMismatchError(f"xstar is {xstar.shape} but the ensemble is {spec.d1}x{spec.d2}")
    if N < 1 or b < 1 or N % b:
        raise ConfigurationError(f"batch size {b} does not divide N = {N}")

    matrices = spec.sample(derive_rng(seed, "sensing-matrices"), N)
    epsilon = noise.sample(derive_rng(seed, "noise"), N)
    y = np.tensordot(matrices, xstar, axes=([1, 2], [0, 1])) + epsilon
    logger.debug("Generated %d %s measurements of a %dx%d matrix (b=%d, seed=%d)", N, spec.kind.value, spec.d1, spec.d2, b, seed)

    return SensingDataset(
        matrices=_frozen(matrices),
        y=_frozen(y),
        b=b,
        ensemble=spec,
        noise=noise,
        seed=seed,
        epsilon=_frozen(epsilon),
        xstar=_frozen(xstar.copy()),
    )


def apply_operator(ds: SensingDataset, x: Matrix, index_range: IndexRange = None) -> Vector:
    """(⟨Aᵢ, x⟩) for i in the range."""
    if x.shape != (ds.d1, ds.d2):
        raise DimensionMismatchError(f"operand is {x.shape}, sensing matrices are {ds.d1}x{ds.d2}")
    window = ds.resolve(index_range)
    return np.tensordot(ds.matrices[window], x, axes=([1, 2], [0, 1]))


def apply_adjoint(ds: SensingDataset, v: Vector, index_range: IndexRange = None) -> Matrix:
    """Σᵢ vᵢ Aᵢ over the range, unnormalised."""
    window = ds.resolve(index_range)
    if v.shape != (window.stop - window.start,):
        raise DimensionMismatchError(f"{v.shape[0]} weights for a range of {window.stop - window.start}")
    return np.tensordot(v, ds.matrices[window], axes=(0, 0))


def export_dataset(ds: SensingDataset, directory: Union[str, Path]) -> Path:
    """Write manifest.json plus LRMX files for the matrices, y, ε and X* (when known)."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    files = {"matrices": MATRICES_NAME, "y": OBSERVATIONS_NAME}
    write_lrmx_stack(directory / MATRICES_NAME, ds.matrices)
    write_lrmx(directory / OBSERVATIONS_NAME, ds.y.reshape(-1, 1))
    if ds.epsilon is not None:
        write_lrmx(directory / NOISE_NAME, ds.epsilon.reshape(-1, 1))
        files["epsilon"] = NOISE_NAME
    if ds.xstar is not None:
        write_lrmx(directory / TRUTH_NAME, ds.xstar)
        files["xstar"] = TRUTH_NAME

    manifest = {
        "d1": ds.d1,
        "d2": ds.d2,
        "N": ds.N,
        "b": ds.b,
        "r": ds.rank,
        "seed": ds.seed,
        "generator_version": GENERATOR_VERSION,
        "ensemble": ds.ensemble.kind.value,
        "noise": {"kind": ds.noise.kind.value, "sigma": ds.noise.sigma},
        "files": files,
    }
    (directory / MANIFEST_NAME).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return directory


def load_dataset(directory: Union[str, Path]) -> SensingDataset:
    directory = Path(directory)
    manifest_path = directory / MANIFEST_NAME
    if not manifest_path.exists():
        raise FormatError(f"no {MANIFEST_NAME} in {directory}")
    try:
        manifest = json.loads(manifest_path.read_text())
        files = manifest["files"]
        spec = EnsembleSpec(manifest["d1"], manifest["d2"], manifest["ensemble"])
        noise = NoiseSpec(manifest["noise"]["kind"], manifest["noise"]["sigma"])
        b, seed = int(manifest["b"]), int(manifest["seed"])
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"{manifest_path}: {exc}") from exc

    matrices = read_lrmx_stack(directory / files["matrices"])
    y = read_lrmx(directory / files["y"]).ravel()
    epsilon = read_lrmx(directory / files["epsilon"]).ravel() if "epsilon" in files else None
    xstar = read_lrmx(directory / files["xstar"]) if "xstar" in files else None
    if matrices.shape[0] != manifest["N"]:
        raise FormatError(f"manifest declares N={manifest['N']} but {matrices.shape[0]} matrices were read")

    return SensingDataset(
        matrices=_frozen(matrices),
        y=_frozen(y),
        b=b,
        ensemble=spec,
        noise=noise,
        seed=seed,
        epsilon=None if epsilon is None else _frozen(epsilon),
        xstar=None if xstar is None else _frozen(xstar),
    )
