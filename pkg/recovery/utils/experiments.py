"""
Experiment harness: convergence curves, exact-recovery phase transition and
statistical-error scaling.

Trial k at sample size N draws every random quantity from streams derived
from (master_seed, experiment, N, k), so trials can run concurrently and
adding trials leaves earlier ones untouched. Results are gathered and sorted
by (N, trial) before any table is built.
"""

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
import pandas as pd
from scipy.optimize import isotonic_regression

from recovery.exceptions import ConfigurationError, NumericalError
from recovery.utils.config import ExperimentConfig
from recovery.utils.dense_core import Matrix
from recovery.utils.objective import FactorPair
from recovery.utils.seeds import derive_rng, derive_seed
from recovery.utils.sensing import EnsembleSpec, NoiseSpec, SensingDataset, generate_dataset
from recovery.utils.solvers import (
    CSV_FLOAT_FORMAT,
    SolverConfig,
    SolveTrace,
    default_step_size,
    epoch_data_passes,
    gd_solve,
    init_projected_gd,
    svrg_solve,
)

logger = logging.getLogger(__name__)

CONVERGENCE_COLUMNS = ["algorithm", "trial", "data_passes", "rel_error"]
PHASE_COLUMNS = ["N", "N_over_rdprime", "prob_recovery", "trials"]
STATERR_COLUMNS = ["N", "N_over_rdprime", "mean_sq_rel_error", "stderr"]

CV_BATCH_FRACTIONS = (50, 20, 10)
CV_M_MULTIPLIERS = (1, 2, 5)


@dataclass(frozen=True)
class SvrgParameters:
    b: int
    m: int


@dataclass
class TrialRecord:
    trial_id: int
    seed: int
    d1: int
    d2: int
    r: int
    N: int
    b: int
    algorithm: str
    final_rel_error: float
    recovered: bool
    wall_time: float
    diverged: bool = False
    error: str = ""
    trace: Optional[SolveTrace] = None

    def trace_points(self) -> List[List[float]]:
        if self.trace is None:
            return []
        return [[record.data_passes, record.rel_error] for record in self.trace.records]


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    frame: pd.DataFrame
    records: List[TrialRecord] = field(default_factory=list)
    parameters: Dict[int, SvrgParameters] = field(default_factory=dict)

    def to_csv(self, path: Union[str, Path]) -> Path:
        return write_csv(self.frame, path)


def write_csv(frame: pd.DataFrame, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT, na_rep="nan")
    return path


def sample_ground_truth(rng: np.random.Generator, d1: int, d2: int, r: int) -> Tuple[Matrix, FactorPair]:
    """X* = U*V*ᵀ with i.i.d. N(0, 1) factor entries, plus its balanced factor pair."""
    xstar = rng.standard_normal((d1, r)) @ rng.standard_normal((d2, r)).T
    return xstar, FactorPair.balanced(xstar, r)


def nearest_batch_size(N: int, target: float) -> int:
    """The divisor of N closest to target (the smaller one on ties)."""
    if N < 1:
        raise ConfigurationError(f"N must be positive, got {N}")
    divisors = [d for d in range(1, N + 1) if N % d == 0]
    return min(divisors, key=lambda d: (abs(d - target), d))


def epochs_for_budget(budget: float, m: int, b: int, N: int) -> int:
    return max(1, math.ceil(budget / epoch_data_passes(m, b, N) - 1e-9))


def default_parameters(cfg: ExperimentConfig, N: int) -> SvrgParameters:
    b = nearest_batch_size(N, N / cfg.batches)
    return SvrgParameters(b=b, m=max(1, int(round(cfg.m_factor * (N // b)))))


def _trial_dataset(cfg: ExperimentConfig, N: int, b: int, seed: int) -> SensingDataset:
    xstar, _ = sample_ground_truth(derive_rng(seed, "ground-truth"), cfg.d1, cfg.d2, cfg.r)
    noise = NoiseSpec.gaussian(cfg.noise_sigma) if cfg.noise_sigma > 0 else NoiseSpec.none()
    spec = EnsembleSpec(cfg.d1, cfg.d2, cfg.ensemble)
    return generate_dataset(spec, xstar, N, b, noise, derive_seed(seed, "dataset"))


def run_trial(
    cfg: ExperimentConfig,
    N: int,
    trial_id: int,
    params: SvrgParameters,
    tag: str,
    with_gd: bool = False,
) -> List[TrialRecord]:
    """
    One trial: fresh X* and measurements, projected-gradient initialization,
    then SVRG (and GD on the same data-pass budget when with_gd is set).

    Numerical failures are logged and recorded as diverged trials.
    """
    seed = derive_seed(cfg.master_seed, tag, N, trial_id)
    common = dict(trial_id=trial_id, seed=seed, d1=cfg.d1, d2=cfg.d2, r=cfg.r, N=N, b=params.b)

    def failed(algorithm: str, exc: Exception, started: float) -> TrialRecord:
        logger.warning("Trial %d (N=%d, %s) failed: %s", trial_id, N, algorithm, exc)
        return TrialRecord(
            algorithm=algorithm,
            final_rel_error=float("nan"),
            recovered=False,
            wall_time=time.perf_counter() - started,
            diverged=True,
            error=str(exc),
            **common,
        )

    started = time.perf_counter()
    try:
        ds = _trial_dataset(cfg, N, params.b, seed)
        z0 = init_projected_gd(ds, cfg.init)
        eta = cfg.eta if cfg.eta is not None else default_step_size(z0, cfg.eta_scale)
    except NumericalError as exc:
        algorithms = ["svrg", "gd"] if with_gd else ["svrg"]
        return [failed(algorithm, exc, started) for algorithm in algorithms]

    epochs = epochs_for_budget(cfg.data_passes, params.m, params.b, N)
    solver_cfg = SolverConfig(eta=eta, m=params.m, S=epochs, output_policy=cfg.output_policy, seed=derive_seed(seed, "svrg"))
    records = []

    try:
        _, trace = svrg_solve(ds, z0, solver_cfg, reference=ds.xstar)
        final = trace.final_rel_error
        records.append(TrialRecord(
            algorithm="svrg",
            final_rel_error=final,
            recovered=final <= cfg.recovery_threshold,
            wall_time=time.perf_counter() - started,
            trace=trace,
            **common,
        ))
    except NumericalError as exc:
        records.append(failed("svrg", exc, started))

    if with_gd:
        started = time.perf_counter()
        iterations = math.ceil(epochs * epoch_data_passes(params.m, params.b, N) - 1e-9)
        gd_eta = cfg.gd_eta if cfg.gd_eta is not None else eta
        try:
            _, trace = gd_solve(ds, z0, gd_eta, iterations, reference=ds.xstar)
            final = trace.final_rel_error
            records.append(TrialRecord(
                algorithm="gd",
                final_rel_error=final,
                recovered=final <= cfg.recovery_threshold,
                wall_time=time.perf_counter() - started,
                trace=trace,
                **common,
            ))
        except NumericalError as exc:
            records.append(failed("gd", exc, started))
    return records


def select_svrg_parameters(cfg: ExperimentConfig, N: int) -> SvrgParameters:
    """
    Grid search over b ∈ {N/50, N/20, N/10} (nearest divisors of N) and
    m ∈ {n, 2n, 5n}, keeping the pair with the smallest median final error
    over cfg.cv_seeds held-out trials.
    """
    best: Optional[Tuple[float, SvrgParameters]] = None
    candidates = []
    for fraction in CV_BATCH_FRACTIONS:
        b = nearest_batch_size(N, N / fraction)
        for multiplier in CV_M_MULTIPLIERS:
            params = SvrgParameters(b=b, m=multiplier * (N // b))
            if params not in candidates:
                candidates.append(params)

    for params in candidates:
        errors = []
        for k in range(cfg.cv_seeds):
            record = run_trial(cfg, N, k, params, tag=f"cv-{cfg.kind}")[0]
            errors.append(np.inf if record.diverged else record.final_rel_error)
        score = float(np.median(errors))
        logger.debug("CV at N=%d: b=%d m=%d median error %.3e", N, params.b, params.m, score)
        if best is None or score < best[0]:
            best = (score, params)

    logger.info("Selected b=%d, m=%d for N=%d (median error %.3e)", best[1].b, best[1].m, N, best[0])
    return best[1]


def _gather(cfg: ExperimentConfig, with_gd: bool) -> Tuple[List[TrialRecord], Dict[int, SvrgParameters]]:
    sizes = cfg.sample_sizes
    parameters = {
        N: select_svrg_parameters(cfg, N) if cfg.cross_validate else default_parameters(cfg, N)
        for N in sizes
    }
    jobs = [(N, k) for N in sizes for k in range(cfg.trials)]
    logger.info("Running %s: %d trials over N=%s on %d thread(s)", cfg.kind, len(jobs), sizes, cfg.threads)

    def work(job: Tuple[int, int]) -> List[TrialRecord]:
        N, k = job
        return run_trial(cfg, N, k, parameters[N], tag=cfg.kind, with_gd=with_gd)

    if cfg.threads > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            batches = list(pool.map(work, jobs))
    else:
        batches = [work(job) for job in jobs]

    records = [record for batch in batches for record in batch]
    records.sort(key=lambda record: (record.N, record.trial_id, record.algorithm))
    return records, parameters


def run_convergence(cfg: ExperimentConfig) -> ExperimentResult:
    """Relative-error traces of SVRG and GD on matched data-pass budgets, in long format."""
    if len(cfg.sample_sizes) != 1:
        raise ConfigurationError(f"the convergence experiment takes a single N, got {cfg.sample_sizes}")
    records, parameters = _gather(cfg, with_gd=True)
    rows = []
    for record in sorted(records, key=lambda record: (record.algorithm != "svrg", record.trial_id)):
        if record.trace is None:
            continue
        for point in record.trace.records:
            rows.append({
                "algorithm": record.algorithm,
                "trial": record.trial_id,
                "data_passes": point.data_passes,
                "rel_error": point.rel_error,
            })
    frame = pd.DataFrame(rows, columns=CONVERGENCE_COLUMNS)
    return ExperimentResult(config=cfg, frame=frame, records=records, parameters=parameters)


def run_phase(cfg: ExperimentConfig) -> ExperimentResult:
    """Empirical exact-recovery probability per N."""
    if cfg.noise_sigma > 0:
        raise ConfigurationError("the phase experiment needs noiseless measurements")
    records, parameters = _gather(cfg, with_gd=False)
    rows = []
    for N in cfg.sample_sizes:
        recovered = [record.recovered for record in records if record.N == N]
        rows.append({
            "N": N,
            "N_over_rdprime": N / cfg.rd_prime,
            "prob_recovery": float(np.mean(recovered)),
            "trials": len(recovered),
        })
    frame = pd.DataFrame(rows, columns=PHASE_COLUMNS)
    return ExperimentResult(config=cfg, frame=frame, records=records, parameters=parameters)


def run_staterr(cfg: ExperimentConfig) -> ExperimentResult:
    """Mean squared relative error after convergence per N, with its standard error."""
    if not cfg.noise_sigma > 0:
        raise ConfigurationError("the staterr experiment needs noise_sigma > 0")
    records, parameters = _gather(cfg, with_gd=False)
    rows = []
    for N in cfg.sample_sizes:
        errors = np.array([record.final_rel_error for record in records if record.N == N and not record.diverged])
        if errors.size:
            mean = float(np.mean(errors))
            stderr = float(np.std(errors, ddof=1) / math.sqrt(errors.size)) if errors.size > 1 else float("nan")
        else:
            mean = stderr = float("nan")
        rows.append({"N": N, "N_over_rdprime": N / cfg.rd_prime, "mean_sq_rel_error": mean, "stderr": stderr})
    frame = pd.DataFrame(rows, columns=STATERR_COLUMNS)
    return ExperimentResult(config=cfg, frame=frame, records=records, parameters=parameters)


EXPERIMENTS = {
    "convergence": run_convergence,
    "phase": run_phase,
    "staterr": run_staterr,
}


def loglog_slope(frame: pd.DataFrame, x: str = "N", y: str = "mean_sq_rel_error") -> float:
    """Least-squares slope of log(y) against log(x) over rows with positive finite values."""
    data = frame[[x, y]].astype(float)
    data = data[np.isfinite(data[y]) & (data[y] > 0) & (data[x] > 0)]
    if len(data) < 2:
        raise ConfigurationError("a log-log slope needs at least two positive points")
    slope, _ = np.polyfit(np.log(data[x].to_numpy()), np.log(data[y].to_numpy()), 1)
    return float(slope)


def isotonic_residual(probabilities) -> float:
    """Largest distance between the probabilities and their non-decreasing least-squares fit."""
    values = np.asarray(probabilities, dtype=np.float64)
    fitted = isotonic_regression(values, increasing=True).x
    return float(np.max(np.abs(values - fitted))) if values.size else 0.0
