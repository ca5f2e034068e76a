"""INI experiment configuration.

Layout::

    [experiment]
    L = 50
    H = 50
    n_values = 25, 50, 100
    deployments = 20
    alpha = 0.1
    eta = 1.0
    E = 0.1
    methods = equal, sca, bcd, voronoi_min, voronoi_mean, voronoi_max, knn, ga, pso, qlearn
    master_seed = 0
    sim_ttis = 100000
    calibration_samples = 100000
    workers = 1

    [sca]
    max_iters = 200

Every method may have a section named after its tag; its keys are passed
to the optimizer (see ``OPTION_KEYS``).  Values in the file override the
chosen profile.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

from .network import Area, SensingModel
from .optimizers import METHODS, OPTION_KEYS, ErrorBudget

__all__ = ["ConfigError", "ExperimentConfig", "PROFILES", "load_config", "parse_config"]


class ConfigError(ValueError):
    """Invalid or unreadable experiment configuration."""


_DESK_OPTIONS = {
    "sca": {"max_iters": 200},
    "ga": {"generations": 100},
    "pso": {"generations": 100},
    "qlearn": {"ttis": 10_000},
}


@dataclass(frozen=True)
class ExperimentConfig:
    L: float = 50.0
    H: float = 50.0
    n_values: tuple = (25, 50, 100)
    deployments: int = 20
    alpha: float = 0.1
    eta: float = 1.0
    E: float = 0.1
    methods: tuple = METHODS
    method_options: dict = field(default_factory=lambda: {k: dict(v) for k, v in _DESK_OPTIONS.items()})
    master_seed: int = 0
    sim_ttis: int = 100_000
    calibration_samples: int = 100_000
    workers: int = 1
    output_dir: Optional[str] = None

    def __post_init__(self):
        if self.deployments < 1:
            raise ConfigError("deployments must be >= 1")
        if not self.methods:
            raise ConfigError("at least one method is required")
        bad = [m for m in self.methods if m not in METHODS]
        if bad:
            raise ConfigError(f"unknown method(s): {', '.join(bad)}")
        if not self.n_values or any(int(n) < 1 for n in self.n_values):
            raise ConfigError("n_values must be positive integers")
        if self.sim_ttis < 1 or self.calibration_samples < 10_000 or self.workers < 1:
            raise ConfigError("sim_ttis >= 1, calibration_samples >= 1e4 and workers >= 1 are required")
        for method, opts in self.method_options.items():
            if method not in METHODS:
                raise ConfigError(f"options given for unknown method {method!r}")
            unknown = set(opts) - set(OPTION_KEYS[method])
            if unknown:
                raise ConfigError(f"unknown option(s) for {method}: {', '.join(sorted(unknown))}")
        try:
            self.area
            self.model
            self.budget
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    @property
    def area(self) -> Area:
        return Area(self.L, self.H)

    @property
    def model(self) -> SensingModel:
        return SensingModel(eta=self.eta, alpha=self.alpha)

    @property
    def budget(self) -> ErrorBudget:
        return ErrorBudget(self.E)

    def options(self, method: str) -> dict:
        return dict(self.method_options.get(method, {}))


PROFILES = {
    "desk": ExperimentConfig(),
    "full": ExperimentConfig(n_values=tuple(range(25, 251, 25)), deployments=250),
}

_INT_KEYS = {"deployments", "master_seed", "sim_ttis", "calibration_samples", "workers"}
_FLOAT_KEYS = {"L", "H", "alpha", "eta", "E"}


def _convert(text: str):
    low = text.strip().lower()
    if low in ("true", "yes", "on"):
        return True
    if low in ("false", "no", "off"):
        return False
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    return text.strip()


def parse_config(text: str, profile: str = "desk") -> ExperimentConfig:
    if profile not in PROFILES:
        raise ConfigError(f"unknown profile {profile!r}; expected one of {sorted(PROFILES)}")
    parser = configparser.ConfigParser()
    parser.optionxform = str  # keep L/H/E case
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse configuration: {exc}") from exc
    base = PROFILES[profile]
    changes: dict = {}
    options = {k: dict(v) for k, v in base.method_options.items()}
    for section in parser.sections():
        items = dict(parser.items(section))
        if section == "experiment":
            for key, value in items.items():
                try:
                    if key in _INT_KEYS:
                        changes[key] = int(value)
                    elif key in _FLOAT_KEYS:
                        changes[key] = float(value)
                    elif key == "n_values":
                        changes[key] = tuple(int(v) for v in value.split(",") if v.strip())
                    elif key == "methods":
                        changes[key] = tuple(v.strip() for v in value.split(",") if v.strip())
                    elif key == "output_dir":
                        changes[key] = value
                    else:
                        raise ConfigError(f"unknown key {key!r} in [experiment]")
                except ValueError as exc:
                    if isinstance(exc, ConfigError):
                        raise
                    raise ConfigError(f"bad value for {key!r}: {value!r}") from exc
        elif section in METHODS:
            options.setdefault(section, {}).update({k: _convert(v) for k, v in items.items()})
        else:
            raise ConfigError(f"unknown section [{section}]")
    return replace(base, method_options=options, **changes)


def load_config(path, profile: str = "desk") -> ExperimentConfig:
    """Read an INI file; an unreadable file raises ``OSError`` naming the path."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise OSError(f"cannot read configuration {path}: {exc}") from exc
    return parse_config(text, profile)
