"""Simulation configuration: TOML loading, defaults, validation and hashing.

A configuration is a nested mapping with the tables ``grid``, ``laws``,
``initial``, ``time``, ``scheme``, ``tolerances``, ``thresholds`` and
``params`` plus a top-level ``seed``. Missing entries fall back to
:data:`DEFAULTS`; unknown keys are rejected. See ``docs/config.md`` for the
schema.
"""

from __future__ import annotations

import copy
import hashlib
import json
import sys
from dataclasses import dataclass
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ConfigError
from .grid import Grid, make_grid
from .laws import PRESETS as LAW_PRESETS
from .laws import MaterialLaws, make_laws

INITIAL_PRESETS = ("equilibrium", "smooth", "random", "theta_bump", "random_m", "hedgehog")

DEFAULTS: dict = {
    "seed": 0,
    "grid": {"kind": "box_noslip", "dims": [16, 16, 16], "length": 1.0},
    "laws": {"preset": "default"},
    "initial": {
        "preset": "smooth",
        "amplitude": 0.05,
        "theta0": 1.0,
        "m0": [0.0, 0.0, 1.0],
        "bump_height": 1.0,
        "bump_width": 0.15,
        "tilt": 0.6,
    },
    "time": {"policy": "cfl", "safety": 0.4, "dt": 0.0, "n_steps": 200, "output_every": 1, "checkpoint_every": 0},
    "scheme": {
        "advection": "centered",
        "diffusion": "explicit",
        "llg_update": "rotation_exponential",
        "preconditioner": "dct",
    },
    "tolerances": {"projection_tol": 1e-10, "constraint_tol": 1e-8, "eig_tol": 1e-8, "harmonic_tol": 1e-6},
    "thresholds": {
        "energy_drift_max": 5e-3,
        "drift_ratio_min": 1.7,
        "drift_ratio_max": 2.3,
        "entropy_slack_c": 1.0,
        "entropy_balance_max": 0.10,
        "sphere_constraint_max": 1e-12,
        "max_principle_c": 0.5,
        "fixed_point_max": 1e-13,
        "order_min": 1.9,
        "symbol_max_diff": 1e-12,
        "kernel_dimension": 4,
        "decay_r2_min": 0.95,
        "decay_terminal_max": 1e-4,
        "projection_lu_max": 1e-8,
        "idempotence_factor": 10.0,
        "legendre_max": 1e-13,
    },
    "params": {},
}

GRID_KEYS = {
    "box_noslip": {"kind", "dims", "n", "spacing", "length", "origin"},
    "shell_masked": {"kind", "n", "inner_radius", "outer_radius", "half_width"},
}
LAW_KEYS = {"preset", "mu", "kappa", "alpha", "beta", "h", "k", "mu_floor", "kappa_floor", "alpha_floor", "c_floor"}


def _merge(base: dict, override: dict, path: str = "") -> dict:
    """Recursive merge that rejects keys absent from ``base`` (except in free-form tables)."""
    out = copy.deepcopy(base)
    for key, val in override.items():
        where = f"{path}{key}"
        if key not in base and path not in ("grid.", "laws.", "params."):
            raise ConfigError(f"unknown config key {where!r}")
        if where == "grid" and isinstance(val, dict) and val.get("kind", base[key].get("kind")) != base[key].get("kind"):
            out[key] = copy.deepcopy(val)  # a new domain kind replaces the whole table
        elif isinstance(val, dict) and isinstance(base.get(key), dict):
            out[key] = _merge(base[key], val, where + ".")
        else:
            out[key] = copy.deepcopy(val)
    return out


@dataclass
class SimConfig:
    """Validated configuration. ``data`` holds the fully resolved nested mapping."""

    data: dict

    def __post_init__(self):
        validate(self.data)

    def __getitem__(self, key):
        return self.data[key]

    @property
    def seed(self) -> int:
        return int(self.data["seed"])

    def grid(self) -> Grid:
        return make_grid(self.data["grid"])

    def laws(self) -> MaterialLaws:
        return make_laws(self.data["laws"])

    def hash(self) -> str:
        return config_hash(self.data)

    def with_overrides(self, override: dict) -> "SimConfig":
        return SimConfig(_merge(self.data, override))

    def to_json(self) -> str:
        return json.dumps(self.data, sort_keys=True, indent=2)


def config_hash(data: dict) -> str:
    """SHA-256 of the canonical JSON encoding (sorted keys), first 16 hex digits."""
    blob = json.dumps(data, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def _positive(name, value):
    if not (isinstance(value, (int, float)) and value > 0):
        raise ConfigError(f"{name} must be a positive number, got {value!r}")


def validate(data: dict) -> None:
    """Raise :class:`ConfigError` on any malformed or out-of-range entry."""
    g = data["grid"]
    kind = g.get("kind", "box_noslip")
    if kind not in GRID_KEYS:
        raise ConfigError(f"unknown grid kind {kind!r}")
    extra = set(g) - GRID_KEYS[kind]
    if extra:
        raise ConfigError(f"unknown grid keys for {kind}: {sorted(extra)}")
    try:
        make_grid(g)
    except ValueError as exc:
        raise ConfigError(f"invalid grid: {exc}") from exc

    law = data["laws"]
    extra = set(law) - LAW_KEYS
    if extra:
        raise ConfigError(f"unknown laws keys: {sorted(extra)}")
    if law.get("preset", "default") not in LAW_PRESETS:
        raise ConfigError(f"unknown laws preset {law.get('preset')!r}")
    make_laws(law)

    ini = data["initial"]
    if ini["preset"] not in INITIAL_PRESETS:
        raise ConfigError(f"unknown initial preset {ini['preset']!r}; known: {INITIAL_PRESETS}")
    _positive("initial.theta0", ini["theta0"])
    if len(ini["m0"]) != 3 or not any(ini["m0"]):
        raise ConfigError("initial.m0 must be a nonzero 3-vector")
    if ini["amplitude"] < 0:
        raise ConfigError("initial.amplitude must be nonnegative")

    t = data["time"]
    if t["policy"] not in ("cfl", "fixed"):
        raise ConfigError(f"time.policy must be 'cfl' or 'fixed', got {t['policy']!r}")
    if not 0 < t["safety"] <= 1:
        raise ConfigError(f"time.safety must lie in (0, 1], got {t['safety']}")
    if t["policy"] == "fixed":
        _positive("time.dt", t["dt"])
    if int(t["n_steps"]) < 1:
        raise ConfigError("time.n_steps must be >= 1")
    if int(t["output_every"]) < 1:
        raise ConfigError("time.output_every must be >= 1")
    if int(t["checkpoint_every"]) < 0:
        raise ConfigError("time.checkpoint_every must be >= 0")

    from .timestepper import StepScheme

    try:
        StepScheme(**data["scheme"])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid scheme: {exc}") from exc

    for name, value in data["tolerances"].items():
        _positive(f"tolerances.{name}", value)
    if not isinstance(data["seed"], int) or data["seed"] < 0:
        raise ConfigError("seed must be a nonnegative integer")


def from_dict(override: dict | None = None, base: dict | None = None) -> SimConfig:
    """Resolve ``override`` on top of ``base`` (default :data:`DEFAULTS`)."""
    return SimConfig(_merge(base if base is not None else DEFAULTS, override or {}))


def load_config(path, base: dict | None = None) -> SimConfig:
    """Read a TOML file and resolve it against ``base``."""
    path = Path(path)
    try:
        with path.open("rb") as fh:
            raw = tomllib.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    return from_dict(raw, base)
