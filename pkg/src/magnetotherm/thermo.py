"""Thermodynamic observables: energies, entropy, entropy production and flux."""

from __future__ import annotations

import csv
from dataclasses import asdict, dataclass

import numpy as np

from .errors import CoefficientError
from .laws import MaterialLaws
from .state import FieldState
from . import ops

CSV_COLUMNS = (
    "time",
    "E",
    "N",
    "r_integral",
    "theta_min",
    "theta_max",
    "m_constraint_max",
    "div_residual",
    "harmonic_residual_norm",
)


def _positive_theta(state):
    th = state.theta[state.grid.cell_mask]
    if th.size and not np.all(th > 0):
        raise CoefficientError("temperature must be positive")


def _integrate(grid, f):
    return float(np.sum(f[grid.cell_mask])) * grid.cell_volume


def free_energy_density(state: FieldState) -> np.ndarray:
    """``psi = 1/2 |F|^2 + 1/2 |grad m|^2 - theta ln theta``."""
    _positive_theta(state)
    g = state.grid
    return 0.5 * (state.F**2).sum(axis=(0, 1)) + ops.dirichlet_energy_density(g, state.m) - state.theta * np.log(state.theta)


def entropy_density(state: FieldState) -> np.ndarray:
    """``eta = 1 + ln theta``."""
    _positive_theta(state)
    return 1.0 + np.log(state.theta)


def internal_energy_density(state: FieldState) -> np.ndarray:
    """``e = 1/2 |F|^2 + 1/2 |grad m|^2 + theta``."""
    _positive_theta(state)
    return 0.5 * (state.F**2).sum(axis=(0, 1)) + ops.dirichlet_energy_density(state.grid, state.m) + state.theta


def kinetic_energy(state: FieldState) -> float:
    """``1/2 |u|^2`` summed over the interior faces of a MAC velocity."""
    if not state.grid.is_box:
        return 0.0
    return 0.5 * ops.face_dot(state.grid, state.u, state.u)


def total_energy(state: FieldState) -> float:
    return kinetic_energy(state) + _integrate(state.grid, internal_energy_density(state))


def total_entropy(state: FieldState) -> float:
    return _integrate(state.grid, entropy_density(state))


def dissipation_fields(state: FieldState, laws: MaterialLaws) -> dict:
    """Viscous, elastic and magnetic dissipation per cell, each nonnegative."""
    g = state.grid
    th = state.theta
    out = {}
    if g.is_box:
        out["viscous"] = ops.viscous_dissipation(g, np.broadcast_to(laws.mu(th), g.dims), state.u)
    else:
        out["viscous"] = np.zeros(g.dims)
    out["elastic"] = ops.link_energy_density(g, np.broadcast_to(laws.kappa(th), g.dims), state.F, "dirichlet")
    w = ops.tangent_laplacian(g, state.m)
    out["magnetic"] = np.broadcast_to(laws.alpha(th), g.dims) * (w**2).sum(axis=0)
    return out


def entropy_production_field(state: FieldState, laws: MaterialLaws) -> np.ndarray:
    """``r = (1/theta)[mu|grad u|^2 + kappa|grad F|^2 + alpha|w|^2 + K grad theta . grad theta / theta]``.

    Every term is a square or a quadratic form in a positive definite matrix, so
    ``r >= 0`` holds cellwise.
    """
    _positive_theta(state)
    g = state.grid
    th = state.theta
    D = dissipation_fields(state, laws)
    gt = ops.grad_cell(g, th, "neumann")
    K = ops.cell_K(g, state, laws)
    ops.check_conductivity(K[..., g.cell_mask], laws, th[g.cell_mask], state.m[:, g.cell_mask])
    Ksym = 0.5 * (K + np.swapaxes(K, 0, 1))
    cond = np.einsum("i...,ij...,j...->...", gt, Ksym, gt)
    r = (D["viscous"] + D["elastic"] + D["magnetic"] + cond / th) / th
    return np.where(g.cell_mask, r, 0.0)


def entropy_flux(state: FieldState, laws: MaterialLaws) -> list:
    """``g = q / theta`` on faces with the arithmetic-mean face temperature; zero on walls."""
    _positive_theta(state)
    g = state.grid
    q = ops.heat_flux(g, state, laws)
    out = []
    for d in range(3):
        thf = ops._avg_to_faces(state.theta, d)
        out.append(q[d] / thf)
    return out


@dataclass
class DiagnosticsRecord:
    time: float
    E: float
    N: float
    r_integral: float
    theta_min: float
    theta_max: float
    m_constraint_max: float
    div_residual: float
    harmonic_residual_norm: float

    def row(self):
        return [getattr(self, c) for c in CSV_COLUMNS]


def diagnostics(state: FieldState, laws: MaterialLaws) -> DiagnosticsRecord:
    g = state.grid
    mask = g.cell_mask
    th = state.theta[mask]
    r = entropy_production_field(state, laws)
    w = ops.tangent_laplacian(g, state.m)
    return DiagnosticsRecord(
        time=float(state.time),
        E=total_energy(state),
        N=total_entropy(state),
        r_integral=_integrate(g, r),
        theta_min=float(th.min()),
        theta_max=float(th.max()),
        m_constraint_max=float(np.abs(np.sqrt((state.m[:, mask] ** 2).sum(axis=0)) - 1.0).max()),
        div_residual=float(np.abs(ops.div_vec(g, state.u)).max()) if g.is_box else 0.0,
        harmonic_residual_norm=float(np.sqrt(_integrate(g, (w**2).sum(axis=0)))),
    )


def write_csv(records, path):
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(CSV_COLUMNS)
        for rec in records:
            wr.writerow([repr(float(v)) for v in rec.row()])


def read_csv(path) -> list[DiagnosticsRecord]:
    with open(path, newline="") as fh:
        rd = csv.reader(fh)
        header = next(rd)
        if tuple(header) != CSV_COLUMNS:
            raise ValueError(f"unexpected CSV header {header}")
        return [DiagnosticsRecord(*map(float, row)) for row in rd]


def consistency_report(records, slack_c: float = 0.0, h: float = 0.0) -> dict:
    """Energy drift, entropy monotonicity and the entropy balance along a trajectory.

    A per-step entropy decrease counts as a violation when it exceeds
    ``slack_c * (dt^2 + dt h^2)``. The balance mismatch compares the discrete
    ``dN/dt`` with the trapezoidal mean of ``int r`` over each step, as the
    relative l2 error over the run.
    """
    if len(records) < 2:
        raise ValueError("need at least two records")
    t = np.array([r.time for r in records])
    E = np.array([r.E for r in records])
    N = np.array([r.N for r in records])
    R = np.array([r.r_integral for r in records])
    dt = np.diff(t)
    if np.any(dt <= 0):
        raise ValueError("record times must be strictly increasing")
    dN = np.diff(N)
    slack = slack_c * (dt**2 + dt * h**2)
    dec = -dN
    rate = dN / dt
    rbar = 0.5 * (R[1:] + R[:-1])
    denom = np.linalg.norm(rbar)
    mismatch = float(np.linalg.norm(rate - rbar) / denom) if denom > 0 else float(np.linalg.norm(rate))
    return {
        "n_records": len(records),
        "E0": float(E[0]),
        "max_rel_E_drift": float(np.abs(E - E[0]).max() / abs(E[0])),
        "final_rel_E_drift": float(abs(E[-1] - E[0]) / abs(E[0])),
        "entropy_decreases": int(np.sum(dec > 0)),
        "entropy_violations": int(np.sum(dec > slack)),
        "max_entropy_decrease_over_slack": float(np.max(dec / np.where(slack > 0, slack, np.inf))) if np.any(slack > 0) else None,
        "max_entropy_decrease": float(max(dec.max(), 0.0)),
        "r_min_integral": float(R.min()),
        "entropy_balance_mismatch": mismatch,
    }


def record_dict(rec: DiagnosticsRecord) -> dict:
    return asdict(rec)


__all__ = [
    "CSV_COLUMNS",
    "DiagnosticsRecord",
    "consistency_report",
    "diagnostics",
    "dissipation_fields",
    "entropy_density",
    "entropy_flux",
    "entropy_production_field",
    "free_energy_density",
    "internal_energy_density",
    "kinetic_energy",
    "read_csv",
    "total_energy",
    "total_entropy",
    "write_csv",
]
