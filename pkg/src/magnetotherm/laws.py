"""Temperature-dependent material coefficients and the heat-conductivity map."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ConfigError

Coefficient = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class Affine:
    """Coefficient ``c0 + c1*theta``; a plain number means ``c1 = 0``."""

    c0: float
    c1: float = 0.0

    def __call__(self, theta):
        theta = np.asarray(theta, dtype=float)
        return self.c0 + self.c1 * theta


def as_coefficient(value) -> Coefficient:
    if callable(value):
        return value
    if np.isscalar(value):
        return Affine(float(value))
    vals = list(value)
    if len(vals) != 2:
        raise ConfigError(f"coefficient must be a number or [c0, c1], got {value!r}")
    return Affine(float(vals[0]), float(vals[1]))


@dataclass(frozen=True)
class MaterialLaws:
    mu: Coefficient
    kappa: Coefficient
    alpha: Coefficient
    beta: Coefficient
    h_fn: Coefficient
    k_fn: Coefficient
    mu_floor: float = 1e-3
    kappa_floor: float = 1e-3
    alpha_floor: float = 1e-3
    c_floor: float = 1e-3
    # Optional full override of the conductivity map; receives cell arrays
    # (u_cell (3,...), F (3,3,...), theta (...), m (3,...)) and returns (3,3,...).
    K_fn: Callable | None = None

    def K(self, u_cell, F, theta, m) -> np.ndarray:
        if self.K_fn is not None:
            return self.K_fn(u_cell, F, theta, m)
        theta = np.asarray(theta, dtype=float)
        h = np.broadcast_to(self.h_fn(theta), theta.shape)
        k = np.broadcast_to(self.k_fn(theta), theta.shape)
        K = k * np.einsum("i...,j...->ij...", m, m)
        for i in range(3):
            K[i, i] += h
        return K

    def K_min_eigenvalue(self, theta, m) -> float:
        """Smallest eigenvalue of the symmetric part of K over the given cells."""
        if self.K_fn is not None:
            K = self.K_fn(None, None, theta, m)
            mats = np.moveaxis(K.reshape(3, 3, -1), -1, 0)
            return float(np.linalg.eigvalsh(0.5 * (mats + np.swapaxes(mats, 1, 2)))[:, 0].min())
        # eigenvalues of h I + k m⊗m are h (twice) and h + k |m|^2
        h = np.asarray(self.h_fn(theta))
        k = np.asarray(self.k_fn(theta)) * (m**2).sum(axis=0)
        return float(np.min(np.minimum(h, h + k)))

    def K_norm_bound(self, theta, m) -> float:
        """Upper bound on the spectral norm of K over the given cells (default K only)."""
        if self.K_fn is not None:
            K = self.K_fn(None, None, theta, m)
            mats = np.moveaxis(K.reshape(3, 3, -1), -1, 0)
            return float(np.abs(np.linalg.eigvalsh(mats)).max())
        h = np.asarray(self.h_fn(theta))
        k = np.asarray(self.k_fn(theta)) * (m**2).sum(axis=0)
        return float(np.max(np.maximum(np.abs(h), np.abs(h + k))))


def make_laws(spec: dict | None = None) -> MaterialLaws:
    """Build laws from a plain mapping of coefficient specs and floors.

    Recognized presets: ``"default"`` (mildly temperature-dependent viscosity and
    elasticity, anisotropic conductivity ``I + 0.5 m⊗m``) and ``"unit"``
    (all coefficients 1, ``beta = 0``, isotropic ``K = I``). Explicit keys override
    the preset.
    """
    spec = dict(spec or {})
    preset = spec.pop("preset", "default")
    base = dict(PRESETS.get(preset) or _unknown_preset(preset))
    base.update(spec)
    floors = {k: float(base.pop(k)) for k in list(base) if k.endswith("_floor")}
    known = {"mu", "kappa", "alpha", "beta", "h", "k"}
    extra = set(base) - known
    if extra:
        raise ConfigError(f"unknown material law keys: {sorted(extra)}")
    return MaterialLaws(
        mu=as_coefficient(base["mu"]),
        kappa=as_coefficient(base["kappa"]),
        alpha=as_coefficient(base["alpha"]),
        beta=as_coefficient(base["beta"]),
        h_fn=as_coefficient(base["h"]),
        k_fn=as_coefficient(base["k"]),
        **floors,
    )


def _unknown_preset(name):
    raise ConfigError(f"unknown material law preset {name!r}; known: {sorted(PRESETS)}")


PRESETS = {
    "default": {
        "mu": [0.8, 0.2],
        "kappa": [0.8, 0.2],
        "alpha": 1.0,
        "beta": 0.5,
        "h": 1.0,
        "k": 0.5,
        "mu_floor": 0.5,
        "kappa_floor": 0.5,
        "alpha_floor": 0.5,
        "c_floor": 0.5,
    },
    "unit": {
        "mu": 1.0,
        "kappa": 1.0,
        "alpha": 1.0,
        "beta": 0.0,
        "h": 1.0,
        "k": 0.0,
        "mu_floor": 0.5,
        "kappa_floor": 0.5,
        "alpha_floor": 0.5,
        "c_floor": 0.5,
    },
}


def validate_laws(laws: MaterialLaws, theta_range=(0.5, 2.0), n_samples: int = 64) -> dict:
    """Sample the coefficient floors over ``theta_range``.

    Returns a report with one entry per bound holding ``passed`` and the worst
    sampled ``margin`` (value minus floor), plus an overall ``passed`` flag.
    K is sampled at the coordinate axes and a fixed set of random unit vectors.
    """
    lo, hi = float(theta_range[0]), float(theta_range[1])
    if not (0.0 < lo <= hi):
        raise ValueError(f"theta range must lie in (0, inf), got {theta_range}")
    theta = np.linspace(lo, hi, max(int(n_samples), 2))
    report = {}
    for name, fn, floor in (
        ("mu", laws.mu, laws.mu_floor),
        ("kappa", laws.kappa, laws.kappa_floor),
        ("alpha", laws.alpha, laws.alpha_floor),
    ):
        vals = np.broadcast_to(fn(theta), theta.shape)
        margin = float(np.min(vals) - floor)
        report[name] = {"passed": margin >= 0.0, "margin": margin}

    rng = np.random.default_rng(12345)
    dirs = np.concatenate([np.eye(3), -np.eye(3), rng.normal(size=(16, 3))])
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    th, d = np.meshgrid(theta, np.arange(len(dirs)), indexing="ij")
    m = dirs[d.ravel()].T
    tt = th.ravel()
    K = laws.K(np.zeros_like(m), np.zeros((3, 3) + tt.shape), tt, m)
    mats = np.moveaxis(K, -1, 0)
    sym_err = float(np.abs(mats - np.swapaxes(mats, 1, 2)).max())
    eig_min = float(np.linalg.eigvalsh(0.5 * (mats + np.swapaxes(mats, 1, 2))).min())
    margin = eig_min - laws.c_floor
    report["K"] = {
        "passed": margin >= 0.0 and sym_err <= 1e-12,
        "margin": margin,
        "symmetry_error": sym_err,
    }
    report["passed"] = all(v["passed"] for v in report.values() if isinstance(v, dict))
    return report
