"""Named initial conditions used by the scenarios."""

from __future__ import annotations

import numpy as np

from .errors import ConfigError
from .grid import Grid
from .projection import helmholtz_project
from .state import FieldState, zero_state
from . import ops

_F_SHAPE = np.array([[1.0, 0.5, 0.0], [0.0, 1.0, 0.3], [0.2, 0.0, 1.0]])


def _unit(v):
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v)


def _box_coords(grid: Grid):
    """Cell-center coordinates scaled to ``[0, 1]`` along each axis."""
    x = grid.cell_centers()
    return [(x[a] - grid.origin[a]) / grid.lengths[a] for a in range(3)]


def _normalize(m):
    return m / np.sqrt((m**2).sum(axis=0))


def _stream_velocity(grid: Grid, amplitude: float) -> list:
    """MAC velocity ``(d_y psi, -d_x psi + d_z chi, -d_y chi)`` from node-based stream functions."""
    nodes = [(grid.axis_nodes(a) - grid.origin[a]) / grid.lengths[a] for a in range(3)]
    cents = [(grid.axis_centers(a) - grid.origin[a]) / grid.lengths[a] for a in range(3)]
    hx, hy, hz = grid.spacing

    def s2(t):
        return np.sin(np.pi * t) ** 2

    # psi at (x node, y node, z center), chi at (x center, y node, z node)
    x, y, z = np.meshgrid(nodes[0], nodes[1], cents[2], indexing="ij")
    psi = amplitude / np.pi * s2(x) * s2(y) * np.cos(np.pi * z)
    x, y, z = np.meshgrid(cents[0], nodes[1], nodes[2], indexing="ij")
    chi = amplitude / np.pi * s2(y) * s2(z) * np.sin(2 * np.pi * x)
    ux = np.diff(psi, axis=1) / hy
    uy = -np.diff(psi, axis=0) / hx + np.diff(chi, axis=2) / hz
    uz = -np.diff(chi, axis=1) / hy
    u = [ux, uy, uz]
    for d in range(3):
        for s in ops.wall_slices(grid, d):
            u[d][s] = 0.0  # sin(pi)^2 leaves roundoff on the walls
    return u


def smooth_state(grid: Grid, amplitude: float = 0.05, theta0: float = 1.0, m0=(0, 0, 1)) -> FieldState:
    """Smooth perturbation of ``(0, 0, theta0, m0)`` of size ``amplitude`` in every field.

    The velocity is the discrete curl of two stream functions that vanish to
    second order at the walls, so it is exactly divergence free and its
    tangential part decays smoothly towards the no-slip walls.
    """
    ops._require_box(grid)
    st = zero_state(grid, theta0, m0)
    X, Y, Z = _box_coords(grid)
    pi = np.pi
    st.u = _stream_velocity(grid, amplitude)
    bump = np.sin(pi * X) * np.sin(pi * Y) * np.sin(pi * Z)
    st.F = amplitude * _F_SHAPE[:, :, None, None, None] * bump
    st.theta = theta0 * (1.0 + amplitude * np.cos(pi * X) * np.cos(pi * Y) * np.cos(pi * Z))
    pert = np.array([np.cos(pi * X) * np.cos(pi * Z), np.cos(pi * Y), np.cos(pi * X) * np.cos(2 * pi * Y)])
    st.m = _normalize(st.m + amplitude * pert)
    return st


def random_state(grid: Grid, amplitude: float = 0.01, theta0: float = 1.0, m0=(0, 0, 1), rng=None) -> FieldState:
    """Cellwise random perturbation of ``(0, 0, theta0, m0)`` with max size ``amplitude`` per field."""
    ops._require_box(grid)
    rng = np.random.default_rng(rng)
    st = zero_state(grid, theta0, m0)
    v = [amplitude * rng.uniform(-1, 1, grid.face_shape(d)) for d in range(3)]
    st.u, _ = helmholtz_project(grid, v)
    st.F = amplitude * rng.uniform(-1, 1, st.F.shape)
    st.theta = theta0 * (1.0 + amplitude * rng.uniform(-1, 1, grid.dims))
    st.m = _normalize(st.m + amplitude * rng.uniform(-1, 1, st.m.shape))
    return st


def theta_bump_state(grid: Grid, theta0: float = 1.0, height: float = 1.0, width: float = 0.15,
                     m0=(0, 0, 1), tilt: float = 0.0) -> FieldState:
    """``u = 0``, ``F = 0``, a Gaussian temperature bump on ``theta0`` and a uniform magnetization.

    ``tilt`` rotates ``m0`` towards the (1, 1, 0) diagonal, which makes the
    conductivity ``h I + k m⊗m`` non-diagonal in grid coordinates.
    """
    st = zero_state(grid, theta0, m0)
    m = _unit(m0)
    diag = _unit([1.0, 1.0, 0.0])
    m = _unit(np.cos(tilt) * m + np.sin(tilt) * diag)
    st.m = np.broadcast_to(m[:, None, None, None], st.m.shape).copy()
    x = grid.cell_centers()
    r2 = sum((x[a] - (grid.origin[a] + 0.5 * grid.lengths[a])) ** 2 for a in range(3))
    st.theta = theta0 + height * np.exp(-r2 / width**2)
    return st


def random_m_state(grid: Grid, theta0: float = 1.0, rng=None) -> FieldState:
    """Independent uniformly distributed unit vectors per cell, ``u = 0``, ``F = 0``."""
    rng = np.random.default_rng(rng)
    st = zero_state(grid, theta0)
    st.m = _normalize(rng.normal(size=st.m.shape))
    return st


def initial_state(grid: Grid, spec: dict, seed: int = 0) -> FieldState:
    """Dispatch on ``spec["preset"]`` (see :data:`magnetotherm.config.INITIAL_PRESETS`)."""
    preset = spec.get("preset", "smooth")
    th = float(spec.get("theta0", 1.0))
    m0 = spec.get("m0", (0.0, 0.0, 1.0))
    amp = float(spec.get("amplitude", 0.05))
    if preset == "equilibrium":
        return zero_state(grid, th, m0)
    if preset == "smooth":
        return smooth_state(grid, amp, th, m0)
    if preset == "random":
        return random_state(grid, amp, th, m0, rng=seed)
    if preset == "theta_bump":
        return theta_bump_state(grid, th, float(spec.get("bump_height", 1.0)), float(spec.get("bump_width", 0.15)),
                                m0, float(spec.get("tilt", 0.0)))
    if preset == "random_m":
        return random_m_state(grid, th, rng=seed)
    if preset == "hedgehog":
        from .equilibria import hedgehog, tangent_noise

        st = zero_state(grid, th)
        m = hedgehog(grid)
        st.m = tangent_noise(grid, m, amp, rng=seed) if amp > 0 else m
        return st
    raise ConfigError(f"unknown initial preset {preset!r}")
