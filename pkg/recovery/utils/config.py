"""
Experiment configuration.

Settings are layered: built-in defaults, then the MATSENSE_* values exposed by
Django settings (seed, threads, step-size scales), then the JSON config file,
then whatever the command line sets explicitly.
"""

import json
import logging
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

from django.conf import settings as django_settings

from recovery.exceptions import ConfigurationError
from recovery.utils.sensing import EnsembleKind
from recovery.utils.solvers import DEFAULT_ETA_SCALE, DEFAULT_S_INIT, DEFAULT_TAU, InitConfig, OutputPolicy

logger = logging.getLogger(__name__)

PRESET_SETTINGS: Dict[str, Tuple[int, int, int]] = {
    "s1": (50, 30, 3),
    "s2": (50, 30, 5),
    "s3": (70, 30, 3),
    "s4": (70, 30, 5),
}

DEFAULT_GRIDS: Dict[str, List[float]] = {
    "convergence": [5.0],
    "phase": [1.0 + 0.5 * k for k in range(11)],
    "staterr": [6.0, 8.0, 12.0, 16.0, 24.0],
}
DEFAULT_NOISE: Dict[str, float] = {"convergence": 0.0, "phase": 0.0, "staterr": 0.5}


@dataclass(frozen=True)
class ExperimentConfig:
    """Immutable, validated parameters of one experiment run."""

    kind: str
    setting: str
    d1: int
    d2: int
    r: int
    noise_sigma: float
    ensemble: EnsembleKind
    n_grid: Tuple[float, ...]
    n_values: Optional[Tuple[int, ...]]
    trials: int
    master_seed: int
    recovery_threshold: float
    batches: int
    m_factor: float
    eta: Optional[float]
    eta_scale: float
    output_policy: OutputPolicy
    data_passes: float
    tau: float
    s_init: int
    gd_eta: Optional[float]
    cross_validate: bool
    cv_seeds: int
    threads: int

    @property
    def d_prime(self) -> int:
        return max(self.d1, self.d2)

    @property
    def rd_prime(self) -> int:
        return self.r * self.d_prime

    @property
    def sample_sizes(self) -> List[int]:
        """Measurement counts N, from n_values when given, else round(ratio·r·d′)."""
        if self.n_values:
            return list(self.n_values)
        return [int(round(ratio * self.rd_prime)) for ratio in self.n_grid]

    @property
    def init(self) -> InitConfig:
        return InitConfig(r=self.r, tau=self.tau, S_init=self.s_init)

    def to_dict(self) -> Dict[str, Any]:
        payload = asdict(self)
        payload["ensemble"] = self.ensemble.value
        payload["output_policy"] = self.output_policy.value
        payload["n_grid"] = list(self.n_grid)
        payload["n_values"] = None if self.n_values is None else list(self.n_values)
        return payload


class ExperimentSettings:
    """Configuration loader for the experiment harness."""

    DEFAULT_SETTINGS: Dict[str, Any] = {
        "setting": "s1",
        "d1": None,
        "d2": None,
        "r": None,
        "noise_sigma": None,  # per-experiment default
        "ensemble": EnsembleKind.GAUSSIAN_IID.value,
        "n_grid": None,  # ratios N/(rd′), per-experiment default
        "n_values": None,  # absolute N, overrides n_grid
        "trials": 30,
        "master_seed": 0,
        "recovery_threshold": 1e-3,
        "batches": 10,
        "m_factor": 2,
        "eta": None,  # None: eta_scale / σ̂₁ of the initial iterate
        "eta_scale": DEFAULT_ETA_SCALE,
        "output_policy": OutputPolicy.RANDOM_T.value,
        "data_passes": 50,
        "tau": DEFAULT_TAU,
        "s_init": DEFAULT_S_INIT,
        "gd_eta": None,  # None: same step size as SVRG
        "cross_validate": False,
        "cv_seeds": 5,
        "threads": 1,
    }

    SUPPORTED_KINDS = ["convergence", "phase", "staterr"]
    SUPPORTED_SETTINGS = list(PRESET_SETTINGS) + ["custom"]
    SUPPORTED_ENSEMBLES = [kind.value for kind in EnsembleKind]
    SUPPORTED_OUTPUT_POLICIES = [policy.value for policy in OutputPolicy]

    # Django settings that feed the defaults layer.
    ENV_MAPPINGS = {
        "MATSENSE_SEED": "master_seed",
        "MATSENSE_THREADS": "threads",
        "MATSENSE_ETA_SCALE": "eta_scale",
        "MATSENSE_TAU": "tau",
    }

    def __init__(self, config_file: Union[str, Path, None] = None, kind: str = "convergence"):
        self.config_file = Path(config_file) if config_file is not None else None
        self.kind = kind
        self.settings = self.DEFAULT_SETTINGS.copy()
        self.load_config()

    def load_config(self) -> None:
        """Apply the environment layer, then the config file when one was named."""
        for name, key in self.ENV_MAPPINGS.items():
            value = getattr(django_settings, name, None)
            if value is not None:
                self.settings[key] = value

        if self.config_file is None:
            return
        if not self.config_file.exists():
            raise ConfigurationError(f"config file not found: {self.config_file}")
        try:
            file_config = json.loads(self.config_file.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigurationError(f"could not read config file {self.config_file}: {exc}") from exc
        if not isinstance(file_config, dict):
            raise ConfigurationError(f"config file {self.config_file} must hold a JSON object")
        unknown = sorted(set(file_config) - set(self.DEFAULT_SETTINGS))
        if unknown:
            raise ConfigurationError(f"unknown config keys in {self.config_file}: {', '.join(unknown)}")
        self.settings.update(file_config)
        logger.debug("Loaded experiment config from %s", self.config_file)

    def save_config(self, path: Union[str, Path, None] = None) -> Path:
        target = Path(path) if path is not None else self.config_file
        if target is None:
            raise ConfigurationError("no path to save the config to")
        target.write_text(json.dumps(self.settings, indent=2, sort_keys=True) + "\n")
        return target

    def get(self, key: str, default: Any = None) -> Any:
        return self.settings.get(key, default)

    def set(self, key: str, value: Any) -> None:
        if key not in self.DEFAULT_SETTINGS:
            raise ConfigurationError(f"unknown config key: {key}")
        self.settings[key] = value

    def dimensions(self) -> Tuple[int, int, int]:
        setting = self.settings["setting"]
        if setting in PRESET_SETTINGS:
            return PRESET_SETTINGS[setting]
        return self.settings["d1"], self.settings["d2"], self.settings["r"]

    def validate(self) -> bool:
        """Check every setting; raise one ConfigurationError listing all problems."""
        errors: List[str] = []
        s = self.settings

        if self.kind not in self.SUPPORTED_KINDS:
            errors.append(f"Experiment must be one of {self.SUPPORTED_KINDS}, got: {self.kind}")

        if s["setting"] not in self.SUPPORTED_SETTINGS:
            errors.append(f"Setting must be one of {self.SUPPORTED_SETTINGS}, got: {s['setting']}")
        elif s["setting"] in PRESET_SETTINGS:
            preset = PRESET_SETTINGS[s["setting"]]
            for key, value in zip(("d1", "d2", "r"), preset):
                if s[key] is not None and s[key] != value:
                    errors.append(f"{key}={s[key]} conflicts with setting {s['setting']} ({key}={value})")
        else:
            d1, d2, r = s["d1"], s["d2"], s["r"]
            if not all(_is_positive_int(v) for v in (d1, d2, r)):
                errors.append(f"A custom setting needs positive integers d1, d2, r, got: {d1}, {d2}, {r}")
            elif r > min(d1, d2):
                errors.append(f"Rank r={r} exceeds min(d1, d2)={min(d1, d2)}")

        if s["ensemble"] not in self.SUPPORTED_ENSEMBLES:
            errors.append(f"Ensemble must be one of {self.SUPPORTED_ENSEMBLES}, got: {s['ensemble']}")
        if s["output_policy"] not in self.SUPPORTED_OUTPUT_POLICIES:
            errors.append(f"Output policy must be one of {self.SUPPORTED_OUTPUT_POLICIES}, got: {s['output_policy']}")

        noise = s["noise_sigma"]
        if noise is not None and not _is_non_negative(noise):
            errors.append(f"noise_sigma must be a non-negative number, got: {noise}")
        elif self.kind == "phase" and noise:
            errors.append("The phase experiment needs noiseless measurements (noise_sigma = 0)")
        elif self.kind == "staterr" and noise is not None and noise == 0:
            errors.append("The staterr experiment needs noise_sigma > 0")

        if s["n_grid"] is not None and (not isinstance(s["n_grid"], list) or not s["n_grid"]
                                        or not all(_is_positive(v) for v in s["n_grid"])):
            errors.append(f"n_grid must be a non-empty list of positive ratios, got: {s['n_grid']}")
        if s["n_values"] is not None and (not isinstance(s["n_values"], list) or not s["n_values"]
                                          or not all(_is_positive_int(v) for v in s["n_values"])):
            errors.append(f"n_values must be a non-empty list of positive integers, got: {s['n_values']}")

        for key in ("trials", "batches", "s_init", "cv_seeds", "threads"):
            if not _is_positive_int(s[key]):
                errors.append(f"{key} must be a positive integer, got: {s[key]}")
        if not _is_positive_int(s["master_seed"]) and s["master_seed"] != 0:
            errors.append(f"master_seed must be a non-negative integer, got: {s['master_seed']}")
        for key in ("recovery_threshold", "m_factor", "eta_scale", "data_passes", "tau"):
            if not _is_positive(s[key]):
                errors.append(f"{key} must be a positive number, got: {s[key]}")
        for key in ("eta", "gd_eta"):
            if s[key] is not None and not _is_non_negative(s[key]):
                errors.append(f"{key} must be a non-negative number or null, got: {s[key]}")
        if not isinstance(s["cross_validate"], bool):
            errors.append(f"cross_validate must be true or false, got: {s['cross_validate']}")

        if errors:
            raise ConfigurationError("Invalid experiment configuration:\n" + "\n".join(f"  - {e}" for e in errors))
        return True

    def to_experiment_config(self) -> ExperimentConfig:
        self.validate()
        s = self.settings
        d1, d2, r = self.dimensions()
        noise = s["noise_sigma"] if s["noise_sigma"] is not None else DEFAULT_NOISE[self.kind]
        grid = s["n_grid"] if s["n_grid"] is not None else DEFAULT_GRIDS[self.kind]
        return ExperimentConfig(
            kind=self.kind,
            setting=s["setting"],
            d1=int(d1),
            d2=int(d2),
            r=int(r),
            noise_sigma=float(noise),
            ensemble=EnsembleKind(s["ensemble"]),
            n_grid=tuple(float(v) for v in grid),
            n_values=None if s["n_values"] is None else tuple(int(v) for v in s["n_values"]),
            trials=int(s["trials"]),
            master_seed=int(s["master_seed"]),
            recovery_threshold=float(s["recovery_threshold"]),
            batches=int(s["batches"]),
            m_factor=float(s["m_factor"]),
            eta=None if s["eta"] is None else float(s["eta"]),
            eta_scale=float(s["eta_scale"]),
            output_policy=OutputPolicy(s["output_policy"]),
            data_passes=float(s["data_passes"]),
            tau=float(s["tau"]),
            s_init=int(s["s_init"]),
            gd_eta=None if s["gd_eta"] is None else float(s["gd_eta"]),
            cross_validate=s["cross_validate"],
            cv_seeds=int(s["cv_seeds"]),
            threads=int(s["threads"]),
        )

    def __str__(self) -> str:
        return f"ExperimentSettings({self.kind}, {self.settings})"


def _is_positive_int(value: Any) -> bool:
    return isinstance(value, int) and not isinstance(value, bool) and value > 0


def _is_non_negative(value: Any) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool) and math.isfinite(value) and value >= 0


def _is_positive(value: Any) -> bool:
    return _is_non_negative(value) and value > 0


def resolve_master_seed(cli_seed: Optional[int]) -> int:
    """--seed when given, else MATSENSE_SEED, else 0."""
    if cli_seed is not None:
        seed = cli_seed
    else:
        seed = getattr(django_settings, "MATSENSE_SEED", None) or 0
    if seed < 0:
        raise ConfigurationError(f"seeds must be non-negative, got {seed}")
    return int(seed)
