"""Equilibria: harmonic maps, constrained-entropy variations, frozen operators and spectra."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg, sparse

from .errors import CoefficientError, ConstraintError, SolverError
from .grid import Grid
from .laws import MaterialLaws
from .projection import PoissonSolver, helmholtz_project
from .state import FieldState
from . import ops


# ---------------------------------------------------------------------------
# harmonic maps


def hedgehog(grid: Grid) -> np.ndarray:
    """``x / |x|`` at cell centers (the grid must avoid the origin)."""
    x = np.array(grid.cell_centers())
    r = np.sqrt((x**2).sum(axis=0))
    if np.any(r == 0):
        raise ValueError("hedgehog is undefined at the origin")
    return x / r


def annulus_mask(grid: Grid, r_lo: float, r_hi: float) -> np.ndarray:
    """Active cells with center radius in ``[r_lo, r_hi]`` whose 7-point stencil is active."""
    x = np.array(grid.cell_centers())
    r = np.sqrt((x**2).sum(axis=0))
    return grid.interior_mask & (r >= r_lo) & (r <= r_hi)


def radial_bump(grid: Grid, center: float, half_width: float) -> np.ndarray:
    """Smooth compactly supported weight ``exp(1 - 1/(1 - s^2))``, ``s = (|x| - center)/half_width``.

    Midpoint sums of a smooth compactly supported integrand carry no boundary
    quadrature error, so weighted residual norms show the clean stencil order.
    """
    x = np.array(grid.cell_centers())
    s = (np.sqrt((x**2).sum(axis=0)) - center) / half_width
    inside = np.abs(s) < 1
    out = np.zeros(grid.dims)
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - s[inside] ** 2))
    return out * grid.cell_mask


def weighted_residual_norms(grid: Grid, m: np.ndarray, weight: np.ndarray):
    """``(||weight * |res| ||_L2, max weight * |res|)`` for the harmonic residual ``res``."""
    res, _, _ = harmonic_residual(grid, m, "active")
    mag = np.sqrt((res**2).sum(axis=0)) * weight
    return float(np.sqrt((mag**2).sum() * grid.cell_volume)), float(mag.max())


def _region(grid, region):
    if region is None or (isinstance(region, str) and region == "active"):
        return grid.cell_mask
    if isinstance(region, str) and region == "interior":
        return grid.interior_mask
    region = np.asarray(region, dtype=bool)
    if region.shape != grid.dims:
        raise ValueError("region mask must have the grid's shape")
    return region & grid.cell_mask


def harmonic_residual(grid: Grid, m: np.ndarray, region=None, constraint_tol: float = 1e-8):
    """Residual ``lap m + |grad m|^2 m`` and its L2 and max norms over ``region``.

    ``region`` is ``"active"`` (default), ``"interior"`` (cells with a full
    stencil) or a boolean mask. Returns ``(field, l2_norm, max_norm)``; the
    field is zero outside the region.
    """
    ops._check_unit(grid, m, constraint_tol)
    mask = _region(grid, region)
    res = ops.tangent_laplacian(grid, m) * mask
    mag = np.sqrt((res**2).sum(axis=0))
    l2 = float(np.sqrt((mag[mask] ** 2).sum() * grid.cell_volume))
    mx = float(mag[mask].max()) if mask.any() else 0.0
    return res, l2, mx


def conformal_modes(grid: Grid, m: np.ndarray) -> np.ndarray:
    """Orthonormal basis (columns) of the target rotations ``e_k x m`` and boosts ``P_m e_k``.

    For the hedgehog these six tangent fields are the neutral directions of the
    continuum energy. On a staircase shell the boosts pick up an O(h) negative
    curvature, so they seed a slow instability of the harmonic-map flow.
    """
    mask = grid.cell_mask
    cols = []
    for k in range(3):
        e = np.zeros((3, 1, 1, 1))
        e[k] = 1.0
        e = np.broadcast_to(e, m.shape)
        cols.append(((e - (e * m).sum(axis=0) * m) * mask).ravel())
        cols.append((ops.cross(e, m) * mask).ravel())
    q, _ = np.linalg.qr(np.stack(cols, axis=1))
    return q


def tangent_noise(grid: Grid, m: np.ndarray, amplitude: float, rng=None, remove_conformal: bool = True):
    """Unit field ``normalize(m + n)`` with random tangent ``n`` of max size ``amplitude``.

    With ``remove_conformal`` the noise is orthogonal to :func:`conformal_modes`.
    """
    rng = np.random.default_rng(rng)
    mask = grid.cell_mask
    n = rng.normal(size=m.shape)
    n = (n - (n * m).sum(axis=0) * m) * mask
    if remove_conformal:
        q = conformal_modes(grid, m)
        v = n.ravel()
        n = (v - q @ (q.T @ v)).reshape(m.shape)
    peak = np.abs(n).max()
    if peak > 0:
        n *= amplitude / peak
    out = m + n
    out /= np.sqrt((out**2).sum(axis=0))
    return np.where(mask, out, m)


@dataclass
class HarmonicMapResult:
    m: np.ndarray
    residual: float
    iterations: int
    history: list = field(default_factory=list)


def harmonic_map_solve(grid: Grid, m0: np.ndarray, tol: float = 1e-8, max_iter: int = 200000,
                       safety: float = 0.9, region=None, record_every: int = 100) -> HarmonicMapResult:
    """Harmonic-map heat flow ``m_t = -m x (m x lap m)`` until the residual L2 norm is below ``tol``.

    Each step rotates every cell vector about ``m x lap m``, so the unit length
    is kept to roundoff. Raises :class:`SolverError` carrying the residual
    history when ``max_iter`` is exceeded.
    """
    ops._check_unit(grid, m0, 1e-8)
    dt = safety * grid.h_min**2 / 6.0
    m = m0.copy()
    history = []
    from .timestepper import _rotate

    for it in range(max_iter + 1):
        lap = ops.laplacian(grid, m, "neumann")
        w = lap - (m * lap).sum(axis=0) * m
        w *= _region(grid, region)
        res = float(np.sqrt((w**2).sum() * grid.cell_volume))
        if it % record_every == 0:
            history.append((it, res))
        if res <= tol:
            history.append((it, res))
            return HarmonicMapResult(m, res, it, history)
        omega = ops.cross(m, lap) * grid.cell_mask
        m = _rotate(m, omega, dt)
    raise SolverError(
        f"harmonic map flow did not reach {tol:.1e} in {max_iter} iterations (residual {res:.3e})",
        residual=res,
        iterations=max_iter,
        history=history,
    )


def equilibrium_pressure(grid: Grid, m: np.ndarray) -> np.ndarray:
    """``-1/2 |grad m|^2`` with its mean over active cells removed."""
    p = -0.5 * ops.grad_sq(grid, m)
    p = p - p[grid.cell_mask].mean()
    return np.where(grid.cell_mask, p, 0.0)


def lagrange_multipliers(grid: Grid, theta, m: np.ndarray, rtol: float = 1e-12):
    """``(lambda_E, lambda_G) = (-1/theta, |grad m|^2 / theta)`` at a constant temperature."""
    th = np.asarray(theta, dtype=float)
    vals = th[grid.cell_mask] if th.shape == grid.dims else th.ravel()
    t0 = float(vals.mean())
    if not t0 > 0:
        raise CoefficientError("temperature must be positive")
    if np.abs(vals - t0).max() > rtol * t0:
        raise ValueError("critical points of the constrained entropy have constant temperature")
    lam_E = -1.0 / t0
    lam_G = -lam_E * ops.grad_sq(grid, m)
    return lam_E, np.where(grid.cell_mask, lam_G, 0.0)


@dataclass
class Variation:
    """A discrete perturbation ``w = (v, J, vartheta, n)``; ``v`` may be ``None`` off the box."""

    v: list | None
    J: np.ndarray
    vartheta: np.ndarray
    n: np.ndarray


def zero_variation(grid: Grid) -> Variation:
    return Variation(ops.zero_faces(grid) if grid.is_box else None,
                     np.zeros((3, 3) + grid.dims), np.zeros(grid.dims), np.zeros((3,) + grid.dims))


def first_variation_residual(state: FieldState, w: Variation) -> float:
    """``int (1/theta + lambda_E) vartheta + lambda_E (u.v + F:J - lap m . n) + lambda_G m.n``.

    ``lambda_E = -1/mean(theta)`` and ``lambda_G = -lambda_E |grad m|^2``; the
    value vanishes up to quadrature error exactly at equilibria.
    """
    g = state.grid
    mask = g.cell_mask
    t0 = float(state.theta[mask].mean())
    lam_E = -1.0 / t0
    lam_G = -lam_E * ops.grad_sq(g, state.m)
    lap = ops.laplacian(g, state.m, "neumann")
    cell = (1.0 / state.theta + lam_E) * w.vartheta
    cell = cell + lam_E * ((state.F * w.J).sum(axis=(0, 1)) - (lap * w.n).sum(axis=0))
    cell = cell + lam_G * (state.m * w.n).sum(axis=0)
    val = float(cell[mask].sum()) * g.cell_volume
    if g.is_box and w.v is not None:
        val += lam_E * ops.face_dot(g, state.u, w.v)
    return val


def project_variation(state: FieldState, w: Variation) -> Variation:
    """Map ``w`` into the admissible set: mean-zero ``vartheta`` and ``m . n = 0``."""
    g = state.grid
    mask = g.cell_mask
    vt = np.where(mask, w.vartheta - w.vartheta[mask].mean(), 0.0)
    n = w.n - (state.m * w.n).sum(axis=0) * state.m
    return Variation(w.v, w.J, vt, np.where(mask, n, 0.0))


def stab_functional(grid: Grid, m: np.ndarray, n: np.ndarray) -> float:
    """``int |grad n|^2 - |grad m|^2 |n|^2`` with the dynamics' gradient stencil."""
    dens = ops.grad_sq(grid, n) - ops.grad_sq(grid, m) * (n * n).sum(axis=0)
    return float(dens[grid.cell_mask].sum()) * grid.cell_volume


def second_variation_form(state: FieldState, w: Variation) -> float:
    """``-(1/theta) int vartheta^2/theta + |v|^2 + |J|^2 + |grad n|^2 - |grad m|^2 |n|^2``.

    ``w`` is first projected onto the admissible set.
    """
    g = state.grid
    w = project_variation(state, w)
    t0 = float(state.theta[g.cell_mask].mean())
    quad = float((w.vartheta[g.cell_mask] ** 2).sum()) * g.cell_volume / t0
    quad += float((w.J**2).sum(axis=(0, 1))[g.cell_mask].sum()) * g.cell_volume
    if g.is_box and w.v is not None:
        quad += ops.face_dot(g, w.v, w.v)
    quad += stab_functional(g, state.m, w.n)
    return -quad / t0


def is_equilibrium(state: FieldState, tol: float = 1e-8) -> bool:
    """``u = 0``, ``F = 0``, constant temperature and a harmonic magnetization, within ``tol``."""
    g = state.grid
    th = state.theta[g.cell_mask]
    if any(np.abs(c).max() > tol for c in state.u) or np.abs(state.F).max() > tol:
        return False
    if th.max() - th.min() > tol:
        return False
    _, l2, _ = harmonic_residual(g, state.m)
    return l2 <= tol


# ---------------------------------------------------------------------------
# symbol of the LLG principal part


def llg_symbol_spectrum(theta: float, m, laws: MaterialLaws) -> dict:
    """Eigenvalues of ``alpha I - beta M(m)`` by formula and by a dense solve.

    Returns the formula values ``{alpha, alpha - i beta|m|, alpha + i beta|m|}``,
    the numerical eigenvalues, their max difference and the sector angle
    ``arctan(|beta||m| / alpha)``.
    """
    a = float(laws.alpha(theta))
    b = float(laws.beta(theta))
    return symbol_spectrum(a, b, m)


def symbol_spectrum(alpha: float, beta: float, m) -> dict:
    if not alpha > 0:
        raise CoefficientError(f"alpha must be positive, got {alpha}")
    m = np.asarray(m, dtype=float)
    mn = float(np.linalg.norm(m))
    formula = np.array([alpha - 1j * beta * mn, alpha + 0j, alpha + 1j * beta * mn])
    numeric = np.linalg.eigvals(alpha * np.eye(3) - beta * ops.cross_matrix(m))
    diff = _match_spectra(formula, numeric)
    return {
        "formula": formula,
        "numeric": numeric,
        "max_diff": diff,
        "sector_angle": float(np.arctan2(abs(beta) * mn, alpha)),
        "numeric_sector_angle": float(np.abs(np.angle(numeric)).max()),
        "tan_sector_angle": abs(beta) * mn / alpha,
    }


def _match_spectra(a, b):
    """Max difference under the best pairing of two 3-element spectra."""
    return float(min(np.abs(a - b[list(p)]).max() for p in itertools.permutations(range(len(b)))))


# ---------------------------------------------------------------------------
# frozen linear operator


@dataclass
class Layout:
    """Offsets of the stacked unknowns: interior u faces, F (9 comps), theta, m (3 comps)."""

    grid: Grid
    n_u: tuple
    n_cells: int

    @property
    def blocks(self):
        nu = sum(self.n_u)
        c = self.n_cells
        return {"u": (0, nu), "F": (nu, nu + 9 * c), "theta": (nu + 9 * c, nu + 10 * c), "m": (nu + 10 * c, nu + 13 * c)}

    @property
    def size(self):
        return self.blocks["m"][1]

    def pack(self, u, F, theta, m):
        parts = [u[d][ops.interior_faces(self.grid, d)].ravel() for d in range(3)]
        return np.concatenate(parts + [F.ravel(), theta.ravel(), m.ravel()])

    def unpack(self, x):
        g = self.grid
        u = []
        pos = 0
        for d in range(3):
            arr = np.zeros(g.face_shape(d))
            shp = arr[ops.interior_faces(g, d)].shape
            k = int(np.prod(shp))
            arr[ops.interior_faces(g, d)] = x[pos:pos + k].reshape(shp)
            u.append(arr)
            pos += k
        c = self.n_cells
        F = x[pos:pos + 9 * c].reshape((3, 3) + g.dims)
        th = x[pos + 9 * c:pos + 10 * c].reshape(g.dims)
        m = x[pos + 10 * c:pos + 13 * c].reshape((3,) + g.dims)
        return u, F, th, m


def make_layout(grid: Grid) -> Layout:
    ops._require_box(grid)
    n_u = tuple(int(np.prod(np.zeros(grid.face_shape(d))[ops.interior_faces(grid, d)].shape)) for d in range(3))
    return Layout(grid, n_u, int(np.prod(grid.dims)))


class FrozenBlocks:
    """Matrix-free blocks of the linear operator frozen at a base state.

    Row convention: ``d/dt z + A z = ...`` so diffusion blocks are positive.
    """

    def __init__(self, state: FieldState, laws: MaterialLaws):
        g = state.grid
        ops._require_box(g)
        self.grid = g
        th = state.theta
        self.mu = np.broadcast_to(laws.mu(th), g.dims).copy()
        self.kappa = np.broadcast_to(laws.kappa(th), g.dims).copy()
        self.alpha = np.broadcast_to(laws.alpha(th), g.dims).copy()
        self.beta = np.broadcast_to(laws.beta(th), g.dims).copy()
        self.K = ops.cell_K(g, state, laws)
        ops.check_conductivity(self.K, laws, th, state.m)
        self.m = state.m.copy()
        self.grad_m = ops.grad_cell(g, self.m, "neumann")
        self.gsq = ops.grad_sq(g, self.m)
        self.w = ops.tangent_laplacian(g, self.m)
        self.M = ops.cross_matrix(self.m)

    def A1(self, u):
        return [-c for c in ops.var_coeff_div_faces(self.grid, self.mu, u)]

    def C1(self, n):
        """``[C(m~) n]_i = d_i m~ . lap n + grad m~ : d_i grad n`` averaged onto faces."""
        g = self.grid
        lap = ops.laplacian(g, n, "neumann")
        out = []
        for i in range(3):
            acc = (self.grad_m[i] * lap).sum(axis=0)
            for j in range(3):
                acc = acc + (self.grad_m[j] * ops.second_derivative(g, n, i, j, "neumann")).sum(axis=0)
            f = np.zeros(g.face_shape(i))
            f[ops.interior_faces(g, i)] = ops._faces_to_cells(acc, i)
            out.append(f)
        return out

    def A2(self, F):
        return -ops.var_coeff_div(self.grid, self.kappa, F, "dirichlet")

    def A3(self, theta):
        return ops.heat_flux_divergence(self.grid, ops.flux_from_conductivity(self.grid, theta, self.K))

    def C3(self, n):
        lap = ops.laplacian(self.grid, n, "neumann")
        return -self.alpha * (self.w * (lap + self.gsq * n)).sum(axis=0)

    def A4(self, n):
        lap = ops.laplacian(self.grid, n, "neumann")
        return -(self.alpha * lap - self.beta * np.einsum("ij...,j...->i...", self.M, lap)) - self.alpha * self.gsq * n


def _probe(apply, in_shape, out_shape, radius, out_offset=(0, 0, 0)):
    """Recover the sparse matrix of a local linear map by colored probing.

    ``apply`` maps an array of ``in_shape`` (components first, grid index last
    three) to ``out_shape``. Every output at grid index ``q`` may depend only on
    inputs at ``p`` with ``|p - q - out_offset| <= radius`` per axis.
    """
    P = 2 * radius + 1
    n_in = int(np.prod(in_shape))
    n_out = int(np.prod(out_shape))
    lead_in = in_shape[:-3]
    gin = in_shape[-3:]
    rows, cols, vals = [], [], []
    out_idx = np.arange(n_out).reshape(out_shape)
    in_idx = np.arange(n_in).reshape(in_shape)
    for comp in itertools.product(*(range(k) for k in lead_in)):
        for color in itertools.product(range(P), repeat=3):
            x = np.zeros(in_shape)
            sel = tuple(slice(c, None, P) for c in color)
            x[comp + sel] = 1.0
            y = apply(x)
            nz = np.nonzero(y)
            if not len(nz[0]):
                continue
            q = np.array(nz[-3:])
            lo = q + np.array(out_offset)[:, None] - radius
            p = lo + (np.array(color)[:, None] - lo) % P
            ok = np.all((p >= 0) & (p < np.array(gin)[:, None]), axis=0)
            if not np.all(ok):
                raise AssertionError("probing window too small for this stencil")
            rows.append(out_idx[nz])
            cols.append(in_idx[comp + tuple(p)])
            vals.append(y[nz])
    if not rows:
        return sparse.csr_matrix((n_out, n_in))
    return sparse.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n_out, n_in)
    )


class FrozenOperator:
    """Sparse block operator at a base state plus the Helmholtz projection on the u-row.

    ``matrix`` holds the assembled blocks without the projection;
    :meth:`matvec` applies the projection to the u-row output, matching the
    block layout ``[[A1, 0, 0, P_H C1], [0, A2, 0, 0], [0, 0, A3, C3], [0, 0, 0, A4]]``.
    """

    structure = "upper_block_triangular"

    def __init__(self, state: FieldState, laws: MaterialLaws, projection_tol: float = 1e-13):
        # the projection is applied to outputs of size ~ coefficient / h^2, so the
        # stopping level is relative to the right-hand side
        self.state = state
        self.grid = state.grid
        self.layout = make_layout(self.grid)
        self.ops = FrozenBlocks(state, laws)
        self.solver = PoissonSolver(self.grid, tol=projection_tol, rtol=1e-14)
        self.blocks = self._assemble()
        L = self.layout.blocks
        nu = L["u"][1]
        c = self.layout.n_cells
        B = self.blocks
        self.matrix = sparse.bmat(
            [
                [B["A1"], None, None, B["C1"]],
                [None, B["A2"], None, None],
                [None, None, B["A3"], B["C3"]],
                [None, None, None, B["A4"]],
            ],
            format="csr",
        )
        assert self.matrix.shape == (nu + 13 * c, nu + 13 * c)

    def _assemble(self):
        g = self.grid
        fo = self.ops
        d3 = g.dims
        out = {}

        # u -> u, component by component
        rows = []
        for j in range(3):
            shp = g.face_shape(j)

            def app(x, j=j):
                u = ops.zero_faces(g)
                u[j] = x[0].copy()
                for s in ops.wall_slices(g, j):
                    u[j][s] = 0.0
                return fo.A1(u)[j][None]

            Mj = _probe(app, (1,) + shp, (1,) + shp, 1)
            keep = np.zeros(shp, dtype=bool)
            keep[ops.interior_faces(g, j)] = True
            idx = np.flatnonzero(keep.ravel())
            rows.append(Mj[idx][:, idx])
        out["A1"] = sparse.block_diag(rows, format="csr")

        # m -> u faces; the face stencil reaches two cells beyond its neighbours
        blocks = []
        for i in range(3):
            shp = g.face_shape(i)

            def app(x, i=i):
                return fo.C1(x)[i][None]

            Mi = _probe(app, (3,) + d3, (1,) + shp, 3)
            keep = np.zeros(shp, dtype=bool)
            keep[ops.interior_faces(g, i)] = True
            blocks.append(Mi[np.flatnonzero(keep.ravel())])
        out["C1"] = sparse.vstack(blocks, format="csr")

        # cell blocks
        A2s = _probe(lambda x: -ops.var_coeff_div(g, fo.kappa, x, "dirichlet"), (1,) + d3, (1,) + d3, 1)
        out["A2"] = sparse.kron(sparse.identity(9), A2s, format="csr")
        out["A3"] = _probe(lambda x: fo.A3(x[0])[None], (1,) + d3, (1,) + d3, 1)
        out["C3"] = _probe(lambda x: fo.C3(x)[None], (3,) + d3, (1,) + d3, 1)
        out["A4"] = _probe(fo.A4, (3,) + d3, (3,) + d3, 1)
        return out

    def apply_blocks(self, x):
        """Matrix-free application of the blocks (projection included)."""
        u, F, th, n = self.layout.unpack(x)
        fo = self.ops
        ru = [a + b for a, b in zip(fo.A1(u), fo.C1(n))]
        ru = self._project(ru)
        return self.layout.pack(ru, fo.A2(F), fo.A3(th) + fo.C3(n), fo.A4(n))

    def _project(self, v):
        w, _ = helmholtz_project(self.grid, v, self.solver)
        return w

    def matvec(self, x):
        y = self.matrix @ x
        lo, hi = self.layout.blocks["u"]
        u, _, _, _ = self.layout.unpack(np.concatenate([y[lo:hi], np.zeros(self.layout.size - hi)]))
        pu = self._project(u)
        out = y.copy()
        out[lo:hi] = self.layout.pack(pu, np.zeros((3, 3) + self.grid.dims), np.zeros(self.grid.dims),
                                      np.zeros((3,) + self.grid.dims))[lo:hi]
        return out

    def divergence_matrix(self):
        """Cells x interior faces matrix of the MAC divergence."""
        g = self.grid
        nu = self.layout.blocks["u"][1]

        def app(k):
            x = np.zeros(self.layout.size)
            x[k] = 1.0
            return x

        cols = []
        for k in range(nu):
            u, _, _, _ = self.layout.unpack(app(k))
            cols.append(ops.div_vec(g, u).ravel())
        return np.array(cols).T

    def restricted_dense(self):
        """Dense operator on divergence-free velocities: ``T^T A T`` with ``T = diag(Q, I)``.

        ``Q`` is an orthonormal basis of the discrete divergence kernel, so the
        Helmholtz projection acts as the identity inside the restricted space.
        """
        D = self.divergence_matrix()
        Q = linalg.null_space(D)
        nu = self.layout.blocks["u"][1]
        rest = self.layout.size - nu
        T = sparse.block_diag([sparse.csr_matrix(Q), sparse.identity(rest)], format="csr")
        A = self.matrix.toarray()
        return T.T @ (A @ T.toarray()), Q


def assemble_frozen_operator(state: FieldState, laws: MaterialLaws) -> FrozenOperator:
    """Sparse frozen operator at an admissible base state."""
    from .state import check_state

    problems = [p for p in check_state(state, constraint_tol=1e-8) if "divergence" not in p]
    if problems:
        raise ConstraintError("inadmissible base state: " + "; ".join(problems))
    return FrozenOperator(state, laws)


def normal_stability_check(state: FieldState, laws: MaterialLaws, eig_tol: float = 1e-8) -> dict:
    """Spectral check of the restricted frozen operator at a constant equilibrium.

    Reports all eigenvalues, the minimum real part, the number of eigenvalues
    with ``|lambda| <= eig_tol``, the kernel structure, and the semisimplicity
    test ``rank(A0) == rank(A0^2)``.
    """
    g = state.grid
    if not is_equilibrium(state, tol=1e-12):
        raise ValueError("normal stability check needs a constant equilibrium")
    op = assemble_frozen_operator(state, laws)
    A0, Q = op.restricted_dense()
    try:
        ev = linalg.eigvals(A0)
    except linalg.LinAlgError as exc:
        raise SolverError(f"eigensolver failed: {exc}") from exc
    kernel_count = int(np.sum(np.abs(ev) <= eig_tol))
    rank1 = int(np.linalg.matrix_rank(A0))
    rank2 = int(np.linalg.matrix_rank(A0 @ A0))

    # kernel basis from the SVD and its comparison with (0, 0, const, const)
    U, s, Vt = linalg.svd(A0)
    ker = Vt[s <= eig_tol * max(1.0, s[0])].T
    nu_r = Q.shape[1]
    c = op.layout.n_cells
    expected = []
    th_vec = np.zeros(A0.shape[0])
    th_vec[nu_r + 9 * c:nu_r + 10 * c] = 1.0
    expected.append(th_vec)
    for k in range(3):
        e = np.zeros(A0.shape[0])
        e[nu_r + (10 + k) * c:nu_r + (11 + k) * c] = 1.0
        expected.append(e)
    recon = 0.0
    for e in expected:
        e = e / np.linalg.norm(e)
        recon = max(recon, float(np.linalg.norm(e - ker @ (ker.T @ e))))
    # structure of the computed kernel vectors
    uF = float(np.abs(ker[:nu_r + 9 * c]).max()) if ker.size else 0.0
    th_part = ker[nu_r + 9 * c:nu_r + 10 * c]
    m_part = ker[nu_r + 10 * c:].reshape(3, c, -1)
    th_spread = float(np.ptp(th_part, axis=0).max()) if ker.size else 0.0
    m_spread = float(np.ptp(m_part, axis=1).max()) if ker.size else 0.0
    return {
        "n_unknowns": int(A0.shape[0]),
        "eigenvalues": ev,
        "min_real_part": float(ev.real.min()),
        "kernel_dimension": kernel_count,
        "kernel_dimension_svd": int(ker.shape[1]),
        "rank_A0": rank1,
        "rank_A0_squared": rank2,
        "semisimple": rank1 == rank2,
        "kernel_reconstruction_error": recon,
        "kernel_uF_max": uF,
        "kernel_theta_spread": th_spread,
        "kernel_m_spread": m_spread,
        "eig_tol": eig_tol,
        "grid": g.spec(),
    }
