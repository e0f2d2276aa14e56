"""Lie-split explicit time stepping for the coupled (u, F, theta, m) system.

Sub-step order inside :func:`step`: magnetization, deformation tensor,
temperature, velocity (followed by the Helmholtz projection). Every discrete
coupling term is built as the exact adjoint of its partner, so the semi-discrete
total energy is conserved and the drift comes from the time splitting only.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import linalg as spla

from .errors import NonFiniteState, PositivityLoss, SolverError
from .grid import Grid
from .laws import MaterialLaws
from .projection import PoissonSolver, helmholtz_project
from .state import FieldState
from . import ops

DIFFUSION = ("explicit", "implicit_scalar_diffusion")
LLG_UPDATES = ("rotation_exponential", "project_normalize")


@dataclass
class StepScheme:
    advection: str = "centered"
    diffusion: str = "explicit"
    llg_update: str = "rotation_exponential"
    projection_tol: float = 1e-10
    constraint_tol: float = 1e-8
    preconditioner: str = "dct"
    _solvers: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if self.advection != "centered":
            raise ValueError("only centered advection is implemented")
        if self.diffusion not in DIFFUSION:
            raise ValueError(f"diffusion must be one of {DIFFUSION}")
        if self.llg_update not in LLG_UPDATES:
            raise ValueError(f"llg update must be one of {LLG_UPDATES}")

    def solver(self, grid: Grid) -> PoissonSolver:
        key = id(grid)
        if key not in self._solvers:
            self._solvers[key] = PoissonSolver(grid, tol=self.projection_tol, preconditioner=self.preconditioner)
        return self._solvers[key]


def _check_finite(state: FieldState):
    for a in state.arrays():
        if not np.all(np.isfinite(a)):
            raise NonFiniteState(f"non-finite values at step {state.step}")


def max_coefficient(state: FieldState, laws: MaterialLaws) -> float:
    """Largest diffusion-like coefficient over active cells: mu, kappa, alpha + |beta|, |K|."""
    th = state.theta[state.grid.cell_mask]
    m = state.m[:, state.grid.cell_mask]
    vals = [
        np.max(np.broadcast_to(laws.mu(th), th.shape)),
        np.max(np.broadcast_to(laws.kappa(th), th.shape)),
        np.max(np.broadcast_to(laws.alpha(th), th.shape) + np.abs(np.broadcast_to(laws.beta(th), th.shape))),
        laws.K_norm_bound(th, m),
    ]
    return float(max(vals))


def cfl_dt(state: FieldState, laws: MaterialLaws, safety: float = 0.4) -> float:
    """``safety * min(h / |u|_inf, h^2 / (6 c_max))`` on the smallest spacing."""
    if not 0 < safety <= 1:
        raise ValueError("safety factor must lie in (0, 1]")
    _check_finite(state)
    h = state.grid.h_min
    umax = max(float(np.abs(c).max()) for c in state.u)
    diff = h * h / (2 * 3 * max_coefficient(state, laws))
    adv = h / umax if umax > 0 else np.inf
    return float(safety * min(diff, adv))


def _rotate(m, omega, dt):
    """Rodrigues rotation of every cell vector of ``m`` about ``omega`` by ``|omega| dt``."""
    wn = np.sqrt((omega**2).sum(axis=0))
    ang = wn * dt
    safe = np.where(wn > 0, wn, 1.0)
    k = omega / safe
    c = np.cos(ang)
    s = np.sin(ang)
    kxm = ops.cross(k, m)
    kdm = (k * m).sum(axis=0)
    out = m * c + kxm * s + k * kdm * (1.0 - c)
    return np.where(wn > 0, out, m)


def llg_step(grid: Grid, m, theta, u, laws: MaterialLaws, dt: float,
             update: str = "rotation_exponential", constraint_tol: float = 1e-8):
    """Advance the magnetization by one explicit step of the convected LLG equation.

    ``rotation_exponential`` writes the right-hand side as ``omega x m`` with
    ``omega = m x rhs`` and rotates each cell vector, so lengths are kept to
    roundoff. ``project_normalize`` takes an Euler step and renormalizes.
    """
    if update not in LLG_UPDATES:
        raise ValueError(f"llg update must be one of {LLG_UPDATES}")
    ops._check_unit(grid, m, constraint_tol)
    lap = ops.laplacian(grid, m, "neumann")
    a = laws.alpha(theta)
    b = laws.beta(theta)
    mxl = ops.cross(m, lap)
    rhs = -a * ops.cross(m, mxl) - b * mxl
    if u is not None and grid.is_box and any(np.any(c) for c in u):
        rhs = rhs - ops.advect_cells_skew(grid, u, m)
    if update == "rotation_exponential":
        out = _rotate(m, ops.cross(m, rhs), dt)
    else:
        out = m + dt * rhs
        out = out / np.sqrt((out**2).sum(axis=0))
    if not grid.is_box:
        out = np.where(grid.cell_mask, out, m)
    return out


def implicit_heat_solve(grid: Grid, theta_star: np.ndarray, K: np.ndarray, dt: float, tol: float = 1e-12):
    """Backward-Euler solve of ``(I - dt div(K grad)) theta = theta_star`` (matrix-free GMRES)."""
    n = theta_star.size

    def matvec(x):
        th = x.reshape(grid.dims)
        q = ops.flux_from_conductivity(grid, th, K)
        return (th + dt * ops.heat_flux_divergence(grid, q)).ravel()

    A = spla.LinearOperator((n, n), matvec=matvec, dtype=float)
    x, info = spla.gmres(A, theta_star.ravel(), x0=theta_star.ravel(), rtol=tol, atol=0.0, restart=50, maxiter=200)
    if info != 0:
        raise SolverError("implicit heat solve did not converge", iterations=info)
    return x.reshape(grid.dims)


def step(state: FieldState, laws: MaterialLaws, dt: float, scheme: StepScheme | None = None) -> FieldState:
    """One Lie-split step; returns a new state and leaves the input untouched.

    Raises :class:`PositivityLoss` if the temperature leaves ``(0, inf)`` and
    :class:`NonFiniteState` on NaN/inf.
    """
    scheme = scheme or StepScheme()
    grid = state.grid
    ops._require_box(grid)
    if not dt > 0:
        raise ValueError("dt must be positive")
    _check_finite(state)
    u, F, th, m = state.u, state.F, state.theta, state.m
    if state.sphere_constrained:
        ops._check_unit(grid, m, scheme.constraint_tol)

    mu = np.broadcast_to(laws.mu(th), grid.dims)
    kap = np.broadcast_to(laws.kappa(th), grid.dims)
    al = np.broadcast_to(laws.alpha(th), grid.dims)
    K = ops.cell_K(grid, state, laws)
    moving = any(np.any(c) for c in u)

    # (i) magnetization
    m_new = llg_step(grid, m, th, u, laws, dt, scheme.llg_update, constraint_tol=scheme.constraint_tol)
    w_new = ops.tangent_laplacian(grid, m_new)

    # (ii) deformation tensor
    F_rhs = ops.var_coeff_div(grid, kap, F, "dirichlet")
    if moving:
        G = ops.velocity_gradient(grid, u)
        F_rhs += ops.stretching(G, F) - ops.advect_cells_skew(grid, u, F)
    F_new = F + dt * F_rhs

    # (iii) temperature: dissipation sources and heat flux at the old temperature
    heat = ops.link_energy_density(grid, kap, F, "dirichlet")
    heat += al * (w_new**2).sum(axis=0)
    if moving:
        heat += ops.viscous_dissipation(grid, mu, u)
    th_rhs = heat
    if moving:
        th_rhs = th_rhs - ops.advect_cells_conservative(grid, u, th)
    q = ops.heat_flux(grid, state, laws, K=K)
    if scheme.diffusion == "explicit":
        th_new = th + dt * (th_rhs - ops.heat_flux_divergence(grid, q))
    else:
        th_new = implicit_heat_solve(grid, th + dt * th_rhs, K, dt)
    bad = ~(th_new > 0)
    if bad.any():
        cell = tuple(int(i) for i in np.argwhere(bad)[0])
        raise PositivityLoss(
            f"temperature lost positivity at step {state.step + 1}, cell {cell}: {th_new[cell]:.3e}",
            step=state.step + 1,
            cell=cell,
            value=float(th_new[cell]),
        )

    # (iv) velocity with magnetic and elastic stresses, then projection
    u_rhs = ops.var_coeff_div_faces(grid, mu, u) if moving else ops.zero_faces(grid)
    if moving:
        adv = ops.advect_faces_skew(grid, u, u)
        u_rhs = [a - b for a, b in zip(u_rhs, adv)]
    fm = ops.magnetic_force(grid, w_new, m_new)
    P = ops.mat_mul(F_new, np.swapaxes(F_new, 0, 1))
    fe = ops.velocity_gradient_adjoint(grid, P)
    u_star = [a + dt * (b + c + d) for a, b, c, d in zip(u, u_rhs, fm, fe)]
    u_new, phi = helmholtz_project(grid, u_star, scheme.solver(grid))
    pi = phi / dt - 0.5 * ops.grad_sq(grid, m_new)
    pi -= pi.mean()

    out = FieldState(grid, u_new, F_new, th_new, m_new, pi, state.time + dt, state.step + 1,
                     state.sphere_constrained, dict(state.meta))
    _check_finite(out)
    return out


def run(state: FieldState, laws: MaterialLaws, n_steps: int, dt: float | None = None,
        safety: float = 0.4, scheme: StepScheme | None = None, callback=None) -> FieldState:
    """Advance ``n_steps``; ``dt=None`` recomputes the CFL step every step.

    ``callback(state)`` is invoked on the initial state and after every step.
    """
    scheme = scheme or StepScheme()
    if callback is not None:
        callback(state)
    for _ in range(int(n_steps)):
        h = dt if dt is not None else cfl_dt(state, laws, safety)
        state = step(state, laws, h, scheme)
        if callback is not None:
            callback(state)
    return state
