"""Scenario configs: parameter sets, initial conditions, grids, bundled data.

A scenario is a flat key-value JSON document; `yemen.json` (bundled) is
the canonical Yemen-outbreak parameterization.  The recruitment rate is
stored as the evaluated number; building the default scenario in code
recomputes it from the birth-rate expression so the two stay consistent.
Keys ending in `_formula` (and `label`) are documentation and are not
interpreted.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .integrate import TimeGrid
from .model import ModelParams, SystemState

__all__ = [
    "ScenarioConfig",
    "ConfigError",
    "yemen",
    "load_config",
    "config_from_dict",
    "yemen_config_path",
    "yemen_cases_path",
]

_DATA_DIR = Path(__file__).resolve().parent / "data"

_PARAM_KEYS = (
    "Lambda", "mu", "beta", "kappa", "omega", "delta", "epsilon",
    "alpha1", "alpha2", "eta", "d", "rho", "c", "u_max",
)
_INITIAL_KEYS = ("S0", "I0", "Q0", "R0", "B0")


class ConfigError(ValueError):
    """Scenario config failed validation."""


@dataclass(frozen=True)
class ScenarioConfig:
    """Deterministic simulation setup: parameters, start state, grid."""

    params: ModelParams
    initial: SystemState
    horizon_days: float
    grid_density: float = 100.0
    label: str = ""

    def __post_init__(self) -> None:
        if not self.horizon_days > 0.0:
            raise ConfigError(f"horizon_days must be > 0, got {self.horizon_days}")
        if not self.grid_density >= 1.0:
            raise ConfigError(f"grid_density must be >= 1, got {self.grid_density}")
        x = self.initial
        for name, value in (("S0", x.S), ("I0", x.I), ("Q0", x.Q), ("R0", x.R), ("B0", x.B)):
            if not value >= 0.0:
                raise ConfigError(f"{name} must be >= 0, got {value}")

    def grid(self) -> TimeGrid:
        return TimeGrid.with_density(self.horizon_days, self.grid_density)

    def to_dict(self) -> dict:
        d = {key: getattr(self.params, key) for key in _PARAM_KEYS}
        d.update(
            S0=self.initial.S, I0=self.initial.I, Q0=self.initial.Q,
            R0=self.initial.R, B0=self.initial.B,
            horizon_days=self.horizon_days, grid_density=self.grid_density,
        )
        if self.label:
            d["label"] = self.label
        return d


def yemen(u_max: float = 0.95, c: float = 1.0) -> ScenarioConfig:
    """The Yemen 2017-18 outbreak scenario (354-day horizon).

    The recruitment rate comes from the annual birth rate of 28.4 per
    1000 applied to the initial population: 28.4 * N0 / 365000 person/day.
    """
    initial = SystemState(S=28_249_670.0, I=750.0, Q=0.0, R=0.0, B=275e3)
    n0 = initial.human_total
    params = ModelParams(
        Lambda=28.4 * n0 / 365000.0,
        mu=1.6e-5,
        beta=0.01891,
        kappa=1e7,
        omega=0.4 / 365.0,
        delta=1.15,
        epsilon=0.2,
        alpha1=6e-6,
        alpha2=3e-6,
        eta=10.0,
        d=0.33,
        rho=0.01891,
        c=c,
        u_max=u_max,
    )
    return ScenarioConfig(
        params=params, initial=initial, horizon_days=354.0,
        grid_density=100.0, label="yemen-2017",
    )


def config_from_dict(doc: dict) -> ScenarioConfig:
    """Build and validate a ScenarioConfig from a flat JSON document."""
    if not isinstance(doc, dict):
        raise ConfigError("config document must be a JSON object")
    known = set(_PARAM_KEYS) | set(_INITIAL_KEYS) | {"horizon_days", "grid_density", "label"}
    unknown = [
        key for key in doc
        if key not in known and not key.endswith("_formula") and not key.startswith("#")
    ]
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
    missing = [key for key in (*_PARAM_KEYS, *_INITIAL_KEYS, "horizon_days") if key not in doc]
    if missing:
        raise ConfigError(f"missing config keys: {', '.join(missing)}")

    def num(key, default=None):
        value = doc.get(key, default)
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            raise ConfigError(f"config key {key} must be a number, got {value!r}")
        return float(value)

    try:
        params = ModelParams(**{key: num(key) for key in _PARAM_KEYS})
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    initial = SystemState(*(num(key) for key in _INITIAL_KEYS))
    return ScenarioConfig(
        params=params,
        initial=initial,
        horizon_days=num("horizon_days"),
        grid_density=num("grid_density", 100.0),
        label=str(doc.get("label", "")),
    )


def load_config(path) -> ScenarioConfig:
    """Read and validate a scenario JSON file."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in {path}: {exc}") from exc
    return config_from_dict(doc)


def yemen_config_path() -> Path:
    """Bundled canonical scenario file."""
    return _DATA_DIR / "yemen.json"


def yemen_cases_path() -> Path:
    """Bundled weekly case-count series for the Yemen outbreak."""
    return _DATA_DIR / "yemen_weekly_cases.csv"
