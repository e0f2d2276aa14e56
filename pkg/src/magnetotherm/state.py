"""The simulator's state container and its invariant checker."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grid import Grid


@dataclass
class FieldState:
    """Full unknown ``(u, F, theta, m)`` plus pressure on a grid.

    ``u`` is a list of three face arrays (MAC); ``F`` has shape ``(3, 3, *dims)``,
    ``m`` has shape ``(3, *dims)``, ``theta`` and ``pi`` have shape ``dims``.
    A state is mutated by one writer at a time (the stepper returns new states).
    """

    grid: Grid
    u: list
    F: np.ndarray
    theta: np.ndarray
    m: np.ndarray
    pi: np.ndarray
    time: float = 0.0
    step: int = 0
    sphere_constrained: bool = True
    meta: dict = field(default_factory=dict)

    def copy(self) -> "FieldState":
        return FieldState(
            self.grid,
            [c.copy() for c in self.u],
            self.F.copy(),
            self.theta.copy(),
            self.m.copy(),
            self.pi.copy(),
            self.time,
            self.step,
            self.sphere_constrained,
            dict(self.meta),
        )

    def arrays(self):
        """Payload arrays in canonical order: u (x, y, z faces), F, theta, m, pi."""
        return [*self.u, self.F, self.theta, self.m, self.pi]


def zero_state(grid: Grid, theta0: float = 1.0, m0=(0.0, 0.0, 1.0)) -> FieldState:
    """A member of the constant-equilibrium set: u = 0, F = 0, constant theta and m."""
    dims = grid.dims
    m0 = np.asarray(m0, dtype=float)
    m0 = m0 / np.linalg.norm(m0)
    m = np.broadcast_to(m0[:, None, None, None], (3,) + dims).copy()
    return FieldState(
        grid=grid,
        u=[np.zeros(grid.face_shape(a)) for a in range(3)],
        F=np.zeros((3, 3) + dims),
        theta=np.full(dims, float(theta0)),
        m=m,
        pi=np.zeros(dims),
    )


def check_state(state: FieldState, constraint_tol: float = 1e-10, projection_tol: float | None = None) -> list[str]:
    """Return a list of human-readable invariant violations (empty when admissible)."""
    g = state.grid
    mask = g.cell_mask
    problems = []
    for name, arr in (("u", state.u), ("F", state.F), ("theta", state.theta), ("m", state.m), ("pi", state.pi)):
        arrs = arr if isinstance(arr, list) else [arr]
        if any(not np.all(np.isfinite(a)) for a in arrs):
            problems.append(f"{name} contains non-finite values")
    bad = mask & ~(state.theta > 0)
    if bad.any():
        idx = tuple(int(i) for i in np.argwhere(bad)[0])
        problems.append(f"theta <= 0 at {int(bad.sum())} cells (first at {idx})")
    if state.sphere_constrained:
        dev = np.abs(np.sqrt((state.m**2).sum(axis=0)) - 1.0)[mask]
        if dev.size and dev.max() > constraint_tol:
            problems.append(f"| |m| - 1 | = {dev.max():.3e} exceeds {constraint_tol:.1e}")
    if g.is_box:
        for a in range(3):
            ua = state.u[a]
            lo = np.take(ua, 0, axis=a)
            hi = np.take(ua, -1, axis=a)
            if np.any(lo != 0) or np.any(hi != 0):
                problems.append(f"u component {a} nonzero on a wall face")
        if projection_tol is not None:
            from .ops import div_vec

            div = np.abs(div_vec(g, state.u)).max()
            if div > projection_tol:
                problems.append(f"divergence {div:.3e} exceeds {projection_tol:.1e}")
    return problems
