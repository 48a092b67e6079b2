"""Flat ``key = value`` experiment configuration.

Each experiment has a table of defaults; a config file or ``--set`` override
may change any listed key and nothing else.  Values are coerced to the type
of the default.  Lines starting with ``#`` and blank lines are ignored.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError

EXPERIMENTS = ("toy_sweep", "chaos_bifurcation", "gp_rate", "gp_bifurcation", "gp_compare", "analyze")

_COMMON = {"seed": 0}

DEFAULTS: dict[str, dict] = {
    "toy_sweep": {
        "beta": 0.1,
        "epsilon_start": 0.0,
        "epsilon_stop": 1.0,
        "epsilon_count": 200,
        "epsilon_spacing": "linear",
        "tolerance": 1e-12,
        "max_iterations": 50000,
        "gap_tolerance": 1e-10,
        # extra points at eps_c * (1 + x), x log-spaced, to resolve the threshold
        "zoom_count": 17,
        "zoom_min": 1e-4,
        "zoom_max": 1.0,
        "rate_window": 20,
        "engine": "batched",
    },
    "chaos_bifurcation": {
        "c1_start": 0.0,
        "c1_stop": 2.0,
        "c1_count": 600,
        "c1_spacing": "linear",
        "c2": 0.0,
        "nonlinear_scale": 2.0,
        "iterations": 1500,
        "tail": 40,
        "period_max": 64,
        "period_tolerance": 1e-9,
        "gap_tolerance": 1e-12,
    },
    "gp_rate": {
        "n_b": 100,
        "alpha": 50.0,
        "beta_gradient": 9e-5,
        "beta_scf": 0.2,
        "perturbation": 0.1,
        "gradient_tolerance": 1e-9,
        "scf_tolerance": 1e-12,
        "max_iterations": 100000,
        "rate_window_gradient": 300,
        "rate_window_scf": 20,
        "rate_floor": 1e-12,
        "h_fd": 1e-6,
        "anomaly_margin": 1e-3,
        # convex-hull uniqueness check: two ODA runs from random starts
        "oda_check_n_b": 40,
        "oda_check_alpha": 30.0,
        "oda_check_N": 2,
    },
    "gp_bifurcation": {
        "n_b": 40,
        "N": 2,
        "alpha_start": 0.0,
        "alpha_stop": 30.0,
        "alpha_count": 120,
        "alpha_spacing": "linear",
        "beta_gradient": 5e-4,
        "gradient_tolerance": 1e-10,
        "oda_tolerance": 1e-11,
        "max_iterations": 100000,
        "density_index": 7,
        "fractional_threshold": 1e-6,
    },
    "gp_compare": {
        "n_b": 100,
        "N": 2,
        "alpha": 30.0,
        "beta_gradient": 9e-5,
        "beta_scf": 0.2,
        "gradient_tolerance": 1e-9,
        "scf_tolerance": 1e-11,
        "oda_tolerance": 1e-11,
        "max_iterations": 200000,
        "scf_aufbau_mode": "lowest_N",
    },
    "analyze": {
        "model": "toy",
        "epsilon": 0.1,
        "c1": 0.1,
        "c2": 0.0,
        "nonlinear_scale": 1.0,
        "n_b": 100,
        "alpha": 50.0,
        "N": 1,
        "point": "minimize",
        "beta_gradient": 9e-5,
        "tolerance": 1e-10,
        "max_iterations": 200000,
    },
}

for _table in DEFAULTS.values():
    for _k, _v in _COMMON.items():
        _table.setdefault(_k, _v)


def parse_config_text(text: str) -> dict[str, str]:
    values: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value, got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        values[key] = value
    return values


def _coerce(key: str, raw, default):
    if isinstance(default, bool):
        if isinstance(raw, bool):
            return raw
        text = str(raw).strip().lower()
        if text in ("1", "true", "yes", "on"):
            return True
        if text in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{key}: expected a boolean, got {raw!r}")
    try:
        if isinstance(default, int):
            value = float(raw)
            if value != int(value):
                raise ValueError
            return int(value)
        if isinstance(default, float):
            return float(raw)
    except (TypeError, ValueError):
        raise ConfigError(f"{key}: expected a {type(default).__name__}, got {raw!r}") from None
    return str(raw)


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    values: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.values[key]

    @property
    def seed(self) -> int:
        return int(self.values["seed"])

    def grid(self, name: str) -> np.ndarray:
        start = self.values[f"{name}_start"]
        stop = self.values[f"{name}_stop"]
        count = self.values[f"{name}_count"]
        spacing = self.values[f"{name}_spacing"]
        return make_grid(start, stop, count, spacing)

    def items(self):
        return sorted(self.values.items())


def make_grid(start: float, stop: float, count: int, spacing: str = "linear") -> np.ndarray:
    if count < 2:
        raise ConfigError(f"grid count must be at least 2, got {count}")
    if spacing == "linear":
        return np.linspace(start, stop, count)
    if spacing == "log":
        if start <= 0 or stop <= 0:
            raise ConfigError("log spacing needs positive endpoints")
        return np.geomspace(start, stop, count)
    raise ConfigError(f"unknown grid spacing {spacing!r}")


def build_config(experiment: str, overrides: dict | None = None, seed: int | None = None) -> ExperimentConfig:
    if experiment not in DEFAULTS:
        raise ConfigError(f"unknown experiment {experiment!r}")
    defaults = DEFAULTS[experiment]
    values = dict(defaults)
    for key, raw in (overrides or {}).items():
        if key == "experiment":
            if raw != experiment:
                raise ConfigError(f"config is for {raw!r}, not {experiment!r}")
            continue
        if key not in defaults:
            raise ConfigError(f"unknown key {key!r} for {experiment}")
        values[key] = _coerce(key, raw, defaults[key])
    if seed is not None:
        values["seed"] = int(seed)
    for key, value in values.items():
        grid_key = key.endswith("_count") and f"{key[:-6]}_start" in values
        if grid_key and value < 2:
            raise ConfigError(f"{key} must be at least 2")
    if values.get("zoom_count", 0) < 0:
        raise ConfigError("zoom_count must be non-negative")
    return ExperimentConfig(experiment, values)


def load_config(experiment: str, path: str | None = None, overrides: dict | None = None,
                seed: int | None = None) -> ExperimentConfig:
    merged: dict = {}
    if path is not None:
        with open(path, encoding="utf-8") as fh:
            merged.update(parse_config_text(fh.read()))
    merged.update(overrides or {})
    return build_config(experiment, merged, seed)


def task_seed(seed: int, index: int) -> int:
    """Seed for grid task ``index``."""
    return int(seed) ^ int(index)
