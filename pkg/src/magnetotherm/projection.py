"""Discrete Helmholtz projection via a Neumann pressure-Poisson solve on the MAC grid."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import fft

from .errors import SolverError
from .grid import Grid
from . import ops

PRECONDITIONERS = ("none", "diagonal", "dct")


@dataclass
class SolveInfo:
    iterations: int
    residual: float
    history: list = field(default_factory=list)


class PoissonSolver:
    """Preconditioned CG for ``-lap(phi) = b`` with homogeneous Neumann data.

    The operator is the MAC Laplacian ``div(grad(.))`` on a box. Constants span
    its kernel, so the right-hand side is projected to mean zero and iterates
    are kept mean-zero. Convergence is declared when the max-norm residual drops
    below ``max(tol, rtol * |b|_inf)``.

    Preconditioners: ``"none"``, ``"diagonal"`` (Jacobi) and ``"dct"``, which
    applies the exact inverse of the uniform-box Neumann Laplacian through a
    type-II cosine transform (CG then converges in one or two iterations).

    A solver owns scratch state only through its cached eigenvalues, so
    separate instances can run concurrently.
    """

    def __init__(self, grid: Grid, tol: float = 1e-10, max_iter: int = 2000, preconditioner: str = "dct",
                 rtol: float = 0.0):
        ops._require_box(grid)
        if not tol > 0:
            raise ValueError("solver tolerance must be positive")
        if preconditioner not in PRECONDITIONERS:
            raise ValueError(f"preconditioner must be one of {PRECONDITIONERS}")
        self.grid = grid
        self.tol = float(tol)
        self.rtol = float(rtol)
        self.max_iter = int(max_iter)
        self.preconditioner = preconditioner
        self._diag = None
        self._eig = None

    def apply(self, phi: np.ndarray) -> np.ndarray:
        """``-lap(phi)`` with mirror ghosts."""
        return -ops.laplacian(self.grid, phi, "neumann")

    def _diagonal(self):
        if self._diag is None:
            d = np.zeros(self.grid.dims)
            for axis in range(3):
                h2 = self.grid.spacing[axis] ** 2
                for step in (1, -1):
                    d += self.grid.link_mask(axis, step) / h2
            self._diag = d
        return self._diag

    def _eigenvalues(self):
        if self._eig is None:
            lam = np.zeros(self.grid.dims)
            for axis in range(3):
                n = self.grid.dims[axis]
                k = np.arange(n)
                ev = (2.0 - 2.0 * np.cos(np.pi * k / n)) / self.grid.spacing[axis] ** 2
                shape = [1, 1, 1]
                shape[axis] = n
                lam = lam + ev.reshape(shape)
            lam[0, 0, 0] = np.inf  # constant mode is removed
            self._eig = lam
        return self._eig

    def _precondition(self, r):
        if self.preconditioner == "none":
            z = r.copy()
        elif self.preconditioner == "diagonal":
            z = r / self._diagonal()
        else:
            z = fft.idctn(fft.dctn(r, type=2, norm="ortho") / self._eigenvalues(), type=2, norm="ortho")
        return z - z.mean()

    def solve(self, b: np.ndarray, x0: np.ndarray | None = None) -> tuple[np.ndarray, SolveInfo]:
        b = b - b.mean()
        tol = max(self.tol, self.rtol * float(np.abs(b).max()))
        x = np.zeros_like(b) if x0 is None else x0 - x0.mean()
        r = b - self.apply(x)
        res = float(np.abs(r).max())
        history = [res]
        if res <= tol:
            return x, SolveInfo(0, res, history)
        z = self._precondition(r)
        p = z.copy()
        rz = float(np.vdot(r, z))
        for it in range(1, self.max_iter + 1):
            Ap = self.apply(p)
            pAp = float(np.vdot(p, Ap))
            if pAp <= 0:
                break
            a = rz / pAp
            x += a * p
            r -= a * Ap
            # refresh the true residual now and then to avoid drift below the stopping level
            if it % 50 == 0:
                r = b - self.apply(x)
            res = float(np.abs(r).max())
            history.append(res)
            if res <= tol:
                r_true = float(np.abs(b - self.apply(x)).max())
                if r_true <= tol:
                    x -= x.mean()
                    return x, SolveInfo(it, r_true, history)
                r = b - self.apply(x)
            z = self._precondition(r)
            rz_new = float(np.vdot(r, z))
            p = z + (rz_new / rz) * p
            rz = rz_new
        raise SolverError(
            f"pressure solve did not reach {tol:.1e} in {self.max_iter} iterations "
            f"(final residual {res:.3e})",
            residual=res,
            iterations=len(history) - 1,
            history=history,
        )


def _solver(grid, solver, tol):
    if solver is None:
        return PoissonSolver(grid, tol=tol)
    return solver


def pressure_poisson(grid: Grid, v: list, solver: PoissonSolver | None = None, tol: float = 1e-10):
    """Mean-zero ``pi`` solving ``lap(pi) = div v`` with ``d_nu pi = v . nu``.

    On the MAC grid the Neumann data sit on the wall faces and cancel against
    the wall-face terms of ``div v``, so the right-hand side is the divergence
    of ``v`` with wall faces zeroed; it has zero mean exactly.
    """
    solver = _solver(grid, solver, tol)
    # grad pi on a wall face equals v there, so those terms cancel from div v
    inner = [c.copy() for c in v]
    for d in range(3):
        for s in ops.wall_slices(grid, d):
            inner[d][s] = 0.0
    rhs = -ops.div_vec(grid, inner)
    pi, info = solver.solve(rhs)
    return pi, info


def helmholtz_project(grid: Grid, v: list, solver: PoissonSolver | None = None, tol: float = 1e-10):
    """Return ``(P_H v, pi)`` with ``P_H v = v - grad pi`` and zero normal trace on walls."""
    pi, info = pressure_poisson(grid, v, solver, tol)
    gp = ops.grad_scalar(grid, pi, "neumann")
    out = []
    for d in range(3):
        w = v[d] - gp[d]
        for s in ops.wall_slices(grid, d):
            w[s] = 0.0
        out.append(w)
    return out, pi


def neumann_laplacian_matrix(grid: Grid):
    """Sparse ``lap`` with mirror ghosts on a box, built from 1D Kronecker factors."""
    from scipy import sparse

    mats = []
    for axis in range(3):
        n = grid.dims[axis]
        main = -2.0 * np.ones(n)
        main[0] = main[-1] = -1.0
        T = sparse.diags([np.ones(n - 1), main, np.ones(n - 1)], [-1, 0, 1]) / grid.spacing[axis] ** 2
        mats.append(T)
    I = [sparse.identity(n) for n in grid.dims]
    return (
        sparse.kron(sparse.kron(mats[0], I[1]), I[2])
        + sparse.kron(sparse.kron(I[0], mats[1]), I[2])
        + sparse.kron(sparse.kron(I[0], I[1]), mats[2])
    ).tocsr()
