"""Finite-difference operators on cell-centered and MAC-staggered fields.

Layout conventions (``n = grid.dims``):

* cell scalar: ``(nx, ny, nz)``; stacked cell fields put components first,
  e.g. ``m`` is ``(3, nx, ny, nz)`` and ``F`` is ``(3, 3, nx, ny, nz)``;
* face vector (MAC): list ``[ux, uy, uz]`` with ``ux`` of shape
  ``(nx + 1, ny, nz)`` etc.; the first and last face along the component's own
  axis are wall faces.

Boundary values are supplied by a ghost policy ``bc``:

* ``"neumann"``  -- mirror ghost, zero normal derivative (theta, m);
* ``"dirichlet"`` -- odd reflection, zero wall value (F, tangential u);
* ``"linear"``   -- linear extrapolation, for testing stencil exactness.

On masked grids every link to an inactive cell is treated as a boundary link.
Matrix index convention: ``[grad u]_{ij} = d_i u_j`` and
``(div A)_i = d_j A_{ji}``.
"""

from __future__ import annotations

import numpy as np

from .errors import ConstraintError, CoefficientError, GhostError, GridError
from .grid import Grid

BCS = ("neumann", "dirichlet", "linear")


def _check_bc(bc):
    if bc not in BCS:
        raise GhostError(f"ghost policy must be one of {BCS}, got {bc!r}")


def _require_box(grid: Grid):
    if not grid.is_box:
        raise GridError("staggered velocity operators are only defined on box grids")


def _sl(ndim, ax, start, stop):
    idx = [slice(None)] * ndim
    idx[ax] = slice(start, stop)
    return tuple(idx)


def neighbor(grid: Grid, f: np.ndarray, axis: int, step: int, bc: str) -> np.ndarray:
    """Values of ``f`` at the neighbouring cell ``c + step*e_axis``, ghosts substituted."""
    _check_bc(bc)
    ax = f.ndim - 3 + axis
    n = f.shape[ax]
    out = np.empty_like(f)
    if step > 0:
        out[_sl(f.ndim, ax, 0, n - 1)] = f[_sl(f.ndim, ax, 1, n)]
        edge = _sl(f.ndim, ax, n - 1, n)
        inner = _sl(f.ndim, ax, n - 2, n - 1)
    else:
        out[_sl(f.ndim, ax, 1, n)] = f[_sl(f.ndim, ax, 0, n - 1)]
        edge = _sl(f.ndim, ax, 0, 1)
        inner = _sl(f.ndim, ax, 1, 2)
    if grid.is_box:
        out[edge] = _ghost(f[edge], f[inner], bc)
        return out
    link = grid.link_mask(axis, step)
    opposite = grid.link_mask(axis, -step)
    if bc == "linear":
        back = neighbor(grid, f, axis, -step, "neumann")
        ghost = np.where(opposite, 2.0 * f - back, f)
    else:
        ghost = _ghost(f, None, bc)
    return np.where(link, out, ghost)


def _ghost(f_edge, f_inner, bc):
    if bc == "neumann":
        return f_edge
    if bc == "dirichlet":
        return -f_edge
    return 2.0 * f_edge - f_inner


def _active(grid, f):
    if grid.is_box:
        return f
    return f * grid.cell_mask


# ---------------------------------------------------------------------------
# cell-centered stencils


def grad_cell(grid: Grid, f: np.ndarray, bc: str) -> np.ndarray:
    """Central-difference gradient at cell centers; a leading axis of size 3 is prepended."""
    out = np.empty((3,) + f.shape)
    for axis in range(3):
        out[axis] = (
            neighbor(grid, f, axis, 1, bc) - neighbor(grid, f, axis, -1, bc)
        ) / (2.0 * grid.spacing[axis])
    return _active(grid, out)


def _pad_ghost(f, ax, bc):
    """One ghost layer on each side of axis ``ax`` (box grids)."""
    n = f.shape[ax]
    lo = f[_sl(f.ndim, ax, 0, 1)]
    hi = f[_sl(f.ndim, ax, n - 1, n)]
    glo = _ghost(lo, f[_sl(f.ndim, ax, 1, 2)], bc)
    ghi = _ghost(hi, f[_sl(f.ndim, ax, n - 2, n - 1)], bc)
    return np.concatenate([glo, f, ghi], axis=ax)


def _face_coeff(c, ax):
    """Arithmetic-mean coefficient on all n + 1 faces along ``ax`` (mirror at walls)."""
    return _avg_to_faces(c, ax)


def var_coeff_div(grid: Grid, c, f: np.ndarray, bc: str) -> np.ndarray:
    """Flux-form ``div(c grad f)`` with face coefficients from arithmetic means.

    ``c`` is a positive cell field (or scalar); ``f`` may carry leading component
    axes. Symmetric with respect to the cell inner product.
    """
    _check_bc(bc)
    c = np.broadcast_to(np.asarray(c, dtype=float), grid.dims)
    if np.any(c[grid.cell_mask] <= 0):
        raise CoefficientError("diffusion coefficient must be positive")
    out = np.zeros_like(f, dtype=float)
    if grid.is_box:
        lead = f.ndim - 3
        for axis in range(3):
            h2 = grid.spacing[axis] ** 2
            flux = _face_coeff(c, axis) * np.diff(_pad_ghost(f, lead + axis, bc), axis=lead + axis)
            out += np.diff(flux, axis=lead + axis) / h2
        return out
    for axis in range(3):
        h2 = grid.spacing[axis] ** 2
        for step in (1, -1):
            cf = 0.5 * (c + neighbor(grid, c, axis, step, "neumann"))
            out += cf * (neighbor(grid, f, axis, step, bc) - f) / h2
    return _active(grid, out)


def laplacian(grid: Grid, f: np.ndarray, bc: str) -> np.ndarray:
    """Standard 7-point Laplacian."""
    _check_bc(bc)
    out = np.zeros_like(f, dtype=float)
    lead = f.ndim - 3
    for axis in range(3):
        h2 = grid.spacing[axis] ** 2
        if grid.is_box:
            out += np.diff(_pad_ghost(f, lead + axis, bc), n=2, axis=lead + axis) / h2
        else:
            out += (neighbor(grid, f, axis, 1, bc) + neighbor(grid, f, axis, -1, bc) - 2.0 * f) / h2
    return _active(grid, out)


def link_energy_density(grid: Grid, c, f: np.ndarray, bc: str) -> np.ndarray:
    """Cell share of ``sum_links c_f |f_nb - f|^2 / h^2``.

    Each interior link is split evenly between its two cells; a ghost link
    belongs to its one active cell with weight 1/2. The cell sum times the cell
    volume equals ``-(f, var_coeff_div(c, f))`` exactly.
    """
    _check_bc(bc)
    c = np.broadcast_to(np.asarray(c, dtype=float), grid.dims)
    out = np.zeros(grid.dims)
    lead = f.ndim - 3
    comp_axes = tuple(range(lead))
    if grid.is_box:
        for axis in range(3):
            d = np.diff(_pad_ghost(f, lead + axis, bc), axis=lead + axis)
            sq = (d * d).sum(axis=comp_axes) if comp_axes else d * d
            link = _face_coeff(c, axis) * sq / grid.spacing[axis] ** 2
            out += _faces_to_cells(link, axis)
        return out
    for axis in range(3):
        h2 = grid.spacing[axis] ** 2
        for step in (1, -1):
            cf = 0.5 * (c + neighbor(grid, c, axis, step, "neumann"))
            d = neighbor(grid, f, axis, step, bc) - f
            sq = (d * d).sum(axis=comp_axes) if comp_axes else d * d
            out += 0.5 * cf * sq / h2
    return _active(grid, out)


def dirichlet_energy_density(grid: Grid, m: np.ndarray) -> np.ndarray:
    """Discrete ``1/2 |grad m|^2`` per cell, consistent with the Neumann Laplacian."""
    return 0.5 * link_energy_density(grid, 1.0, m, "neumann")


def grad_sq(grid: Grid, m: np.ndarray) -> np.ndarray:
    """Discrete ``|grad m|^2``; equals ``-m . lap(m)`` whenever ``|m| = 1``."""
    return link_energy_density(grid, 1.0, m, "neumann")


def second_derivative(grid: Grid, f: np.ndarray, i: int, j: int, bc: str) -> np.ndarray:
    if i == j:
        h2 = grid.spacing[i] ** 2
        return (neighbor(grid, f, i, 1, bc) + neighbor(grid, f, i, -1, bc) - 2.0 * f) / h2
    dj = (neighbor(grid, f, j, 1, bc) - neighbor(grid, f, j, -1, bc)) / (2.0 * grid.spacing[j])
    return (neighbor(grid, dj, i, 1, bc) - neighbor(grid, dj, i, -1, bc)) / (2.0 * grid.spacing[i])


def div_mat(grid: Grid, A: np.ndarray, bc: str) -> np.ndarray:
    """Row-convention divergence of a cell matrix field: ``(div A)_i = d_j A_{ji}``."""
    out = np.zeros((3,) + A.shape[2:])
    for j in range(3):
        hj = grid.spacing[j]
        dA = (neighbor(grid, A[j], j, 1, bc) - neighbor(grid, A[j], j, -1, bc)) / (2.0 * hj)
        out += dA
    return _active(grid, out)


def cell_vector_gradient(grid: Grid, v: np.ndarray, bc: str) -> np.ndarray:
    """Central-difference ``G[i, j] = d_i v_j`` of a cell vector field."""
    return np.stack([grad_cell(grid, v[j], bc) for j in range(3)], axis=1)


def divergence_identity_residual(grid: Grid, A: np.ndarray, u: np.ndarray, bc: str = "linear") -> np.ndarray:
    """Cellwise ``(div A).u - div(A u) + A : grad u`` for cell fields; zero for smooth data up to O(h^2)."""
    Au = np.einsum("ij...,j...->i...", A, u)
    G = cell_vector_gradient(grid, u, bc)
    return (div_mat(grid, A, bc) * u).sum(axis=0) - div_vec(grid, Au, bc) + frobenius(A, G)


def frobenius(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Pointwise ``A : B = tr(A B^T)``."""
    return np.einsum("ij...,ij...->...", A, B)


def mat_mul(A, B):
    return np.einsum("ij...,jk...->ik...", A, B)


def cross(a, b):
    return np.cross(a, b, axis=0)


def cross_matrix(m) -> np.ndarray:
    """Skew matrix with ``cross_matrix(m) @ v == m x v``; fields give shape ``(3, 3, ...)``."""
    m = np.asarray(m, dtype=float)
    z = np.zeros_like(m[0])
    return np.array(
        [
            [z, -m[2], m[1]],
            [m[2], z, -m[0]],
            [-m[1], m[0], z],
        ]
    )


def tangent_laplacian(grid: Grid, m: np.ndarray, lap: np.ndarray | None = None) -> np.ndarray:
    """``lap(m) - (m . lap(m)) m``, the discrete ``lap m + |grad m|^2 m`` for unit ``m``."""
    if lap is None:
        lap = laplacian(grid, m, "neumann")
    return lap - (m * lap).sum(axis=0) * m


def elastic_stress_div(grid: Grid, m: np.ndarray) -> np.ndarray:
    """``div(grad m ⊙ grad m)`` via ``[C(m)m]_i = d_i m . lap m + grad m : d_i grad m``.

    ``(grad m ⊙ grad m)_{ij} = d_i m . d_j m``.
    """
    gm = grad_cell(grid, m, "neumann")  # (3 dirs, 3 comps, ...)
    lap = laplacian(grid, m, "neumann")
    out = np.zeros_like(m)
    for i in range(3):
        acc = (gm[i] * lap).sum(axis=0)
        for j in range(3):
            acc += (gm[j] * second_derivative(grid, m, i, j, "neumann")).sum(axis=0)
        out[i] = acc
    return _active(grid, out)


def elastic_stress_div_direct(grid: Grid, m: np.ndarray) -> np.ndarray:
    """Same quantity as :func:`elastic_stress_div`, formed as ``div_mat`` of the product tensor."""
    gm = grad_cell(grid, m, "neumann")
    T = np.einsum("ik...,jk...->ij...", gm, gm)
    return div_mat(grid, T, "neumann")


def ff_transpose_div(grid: Grid, F: np.ndarray) -> np.ndarray:
    """``div(F F^T)`` at cell centers; F has zero Dirichlet data so ``F F^T`` reflects evenly."""
    return div_mat(grid, mat_mul(F, np.swapaxes(F, 0, 1)), "neumann")


# ---------------------------------------------------------------------------
# MAC velocity stencils (box grids only)


def _pad0(a, ax):
    width = [(0, 0)] * a.ndim
    width[ax] = (1, 1)
    return np.pad(a, width)


def _avg_to_faces(a, ax):
    """Average a cell array onto the faces normal to ``ax`` (edge values copied)."""
    n = a.shape[ax]
    out_shape = list(a.shape)
    out_shape[ax] = n + 1
    out = np.empty(out_shape)
    out[_sl(a.ndim, ax, 1, n)] = 0.5 * (a[_sl(a.ndim, ax, 0, n - 1)] + a[_sl(a.ndim, ax, 1, n)])
    out[_sl(a.ndim, ax, 0, 1)] = a[_sl(a.ndim, ax, 0, 1)]
    out[_sl(a.ndim, ax, n, n + 1)] = a[_sl(a.ndim, ax, n - 1, n)]
    return out


def _faces_to_cells(a, ax):
    n = a.shape[ax]
    return 0.5 * (a[_sl(a.ndim, ax, 0, n - 1)] + a[_sl(a.ndim, ax, 1, n)])


def zero_faces(grid: Grid) -> list:
    return [np.zeros(grid.face_shape(a)) for a in range(3)]


def face_to_cell(grid: Grid, u: list) -> np.ndarray:
    """Cell-averaged velocity, shape ``(3, *dims)``."""
    return np.array([_faces_to_cells(u[j], j) for j in range(3)])


def grad_scalar(grid: Grid, f: np.ndarray, bc: str) -> list:
    """MAC gradient of a cell scalar: normal difference on every face.

    Wall faces use the ghost policy (zero for ``"neumann"``).
    """
    _require_box(grid)
    _check_bc(bc)
    out = []
    for d in range(3):
        h = grid.spacing[d]
        n = grid.dims[d]
        g = np.zeros(grid.face_shape(d))
        g[_sl(3, d, 1, n)] = np.diff(f, axis=d) / h
        lo = f[_sl(3, d, 0, 1)]
        hi = f[_sl(3, d, n - 1, n)]
        g[_sl(3, d, 0, 1)] = (lo - _ghost(lo, f[_sl(3, d, 1, 2)], bc)) / h
        g[_sl(3, d, n, n + 1)] = (_ghost(hi, f[_sl(3, d, n - 2, n - 1)], bc) - hi) / h
        out.append(g)
    return out


def div_vec(grid: Grid, v, bc: str = "neumann") -> np.ndarray:
    """Divergence: MAC face field -> cells, or central differences for a cell vector."""
    if isinstance(v, (list, tuple)):
        _require_box(grid)
        return sum(np.diff(v[d], axis=d) / grid.spacing[d] for d in range(3))
    out = np.zeros(v.shape[1:])
    for d in range(3):
        out += (neighbor(grid, v[d], d, 1, bc) - neighbor(grid, v[d], d, -1, bc)) / (2.0 * grid.spacing[d])
    return _active(grid, out)


def wall_slices(grid: Grid, d: int):
    n = grid.dims[d]
    return _sl(3, d, 0, 1), _sl(3, d, n, n + 1)


def interior_faces(grid: Grid, d: int):
    return _sl(3, d, 1, grid.dims[d])


def var_coeff_div_faces(grid: Grid, c, u: list) -> list:
    """Flux-form ``div(c grad u)`` for a MAC velocity with no-slip walls.

    Links along a component's own axis pass through a cell (coefficient at that
    cell); transverse links sit on cell edges (mean of adjacent cells) and use
    odd-reflection ghosts at walls. Wall faces of the result are zero.
    """
    _require_box(grid)
    c = np.broadcast_to(np.asarray(c, dtype=float), grid.dims)
    if np.any(c <= 0):
        raise CoefficientError("viscosity must be positive")
    out = []
    for j in range(3):
        uj = u[j]
        hj = grid.spacing[j]
        Lj = np.zeros_like(uj)
        flux = c * np.diff(uj, axis=j) / hj
        Lj[interior_faces(grid, j)] += np.diff(flux, axis=j) / hj
        cj = _avg_to_faces(c, j)
        for i in range(3):
            if i == j:
                continue
            hi = grid.spacing[i]
            ce = _avg_to_faces(cj, i)
            up = _odd_pad(uj, i)
            fl = ce * np.diff(up, axis=i) / hi
            Lj += np.diff(fl, axis=i) / hi
        for s in wall_slices(grid, j):
            Lj[s] = 0.0
        out.append(Lj)
    return out


def _odd_pad(a, ax):
    n = a.shape[ax]
    p = _pad0(a, ax)
    p[_sl(a.ndim, ax, 0, 1)] = -a[_sl(a.ndim, ax, 0, 1)]
    p[_sl(a.ndim, ax, n + 1, n + 2)] = -a[_sl(a.ndim, ax, n - 1, n)]
    return p


def viscous_dissipation(grid: Grid, c, u: list) -> np.ndarray:
    """Cell field whose volume integral equals ``-(u, var_coeff_div_faces(c, u))``.

    This is the discrete ``mu |grad u|^2``; every link contributes a nonnegative
    amount, split evenly among the cells adjacent to the link.
    """
    _require_box(grid)
    c = np.broadcast_to(np.asarray(c, dtype=float), grid.dims)
    D = np.zeros(grid.dims)
    for j in range(3):
        uj = u[j]
        hj = grid.spacing[j]
        D += c * (np.diff(uj, axis=j) / hj) ** 2
        cj = _avg_to_faces(c, j)
        for i in range(3):
            if i == j:
                continue
            hi = grid.spacing[i]
            ce = _avg_to_faces(cj, i)
            d = np.diff(_odd_pad(uj, i), axis=i)
            link = ce * d * d / hi**2
            D += _faces_to_cells(_faces_to_cells(link, i), j)
    return D


def velocity_gradient(grid: Grid, u: list) -> np.ndarray:
    """Cell-centered ``G[i, j] = d_i u_j``; transverse derivatives use odd wall reflection."""
    _require_box(grid)
    ubar = face_to_cell(grid, u)
    G = np.empty((3, 3) + grid.dims)
    for j in range(3):
        G[j, j] = np.diff(u[j], axis=j) / grid.spacing[j]
        for i in range(3):
            if i != j:
                G[i, j] = (
                    neighbor(grid, ubar[j], i, 1, "dirichlet")
                    - neighbor(grid, ubar[j], i, -1, "dirichlet")
                ) / (2.0 * grid.spacing[i])
    return G


def velocity_gradient_adjoint(grid: Grid, P: np.ndarray) -> list:
    """Face field ``S`` with ``(u, S)_faces = -(P, velocity_gradient(u))_cells`` for all ``u``.

    For a matrix field ``P`` this is the discrete ``(div P)_j = d_i P_{ij}``.
    """
    _require_box(grid)
    out = []
    for j in range(3):
        W = np.zeros(grid.dims)
        for i in range(3):
            if i != j:
                W += (
                    neighbor(grid, P[i, j], i, 1, "neumann")
                    - neighbor(grid, P[i, j], i, -1, "neumann")
                ) / (2.0 * grid.spacing[i])
        S = np.zeros(grid.face_shape(j))
        S[interior_faces(grid, j)] = np.diff(P[j, j], axis=j) / grid.spacing[j] + _faces_to_cells(W, j)
        out.append(S)
    return out


def stretching(G: np.ndarray, F: np.ndarray) -> np.ndarray:
    """``(grad u)^T F`` with ``G[i, j] = d_i u_j``."""
    return np.einsum("ji...,jk...->ik...", G, F)


def advect_cells_skew(grid: Grid, U: list, v: np.ndarray) -> np.ndarray:
    """Skew-symmetric centered ``U . grad v`` at cells: ``(w, C v) = -(C w, v)``."""
    _require_box(grid)
    out = np.zeros_like(v, dtype=float)
    lead = v.ndim - 3
    for d in range(3):
        ax = lead + d
        n = v.shape[ax]
        vp = _pad0(v, ax)
        Ud = U[d]
        out += 0.5 * (
            Ud[_sl(3, d, 1, n + 1)] * vp[_sl(v.ndim, ax, 2, n + 2)]
            - Ud[_sl(3, d, 0, n)] * vp[_sl(v.ndim, ax, 0, n)]
        ) / grid.spacing[d]
    return out


def advect_cells_conservative(grid: Grid, U: list, s: np.ndarray) -> np.ndarray:
    """Centered flux-form ``div(U s)`` at cells; its cell sum vanishes exactly."""
    _require_box(grid)
    out = np.zeros_like(s, dtype=float)
    for d in range(3):
        n = s.shape[d]
        sp = _pad0(s, d)
        Ud = U[d]
        out += (
            Ud[_sl(3, d, 1, n + 1)] * 0.5 * (s + sp[_sl(3, d, 2, n + 2)])
            - Ud[_sl(3, d, 0, n)] * 0.5 * (s + sp[_sl(3, d, 0, n)])
        ) / grid.spacing[d]
    return out


def advect_faces_skew(grid: Grid, U: list, u: list) -> list:
    """Skew-symmetric centered ``U . grad u`` for a MAC velocity.

    Advecting velocities are interpolated onto the control-volume faces around
    each velocity point; the operator is exactly skew on interior faces.
    """
    _require_box(grid)
    out = []
    for j in range(3):
        uj = u[j]
        res = np.zeros_like(uj)
        nj = grid.dims[j]
        for d in range(3):
            hd = grid.spacing[d]
            if d == j:
                ubar = _faces_to_cells(U[j], j)
                res[_sl(3, j, 1, nj)] += 0.5 * (
                    ubar[_sl(3, j, 1, nj)] * uj[_sl(3, j, 2, nj + 1)]
                    - ubar[_sl(3, j, 0, nj - 1)] * uj[_sl(3, j, 0, nj - 1)]
                ) / hd
            else:
                nd = grid.dims[d]
                Ut = _faces_to_cells(_pad0(U[d], j), j)
                up = _pad0(uj, d)
                res += 0.5 * (
                    Ut[_sl(3, d, 1, nd + 1)] * up[_sl(3, d, 2, nd + 2)]
                    - Ut[_sl(3, d, 0, nd)] * up[_sl(3, d, 0, nd)]
                ) / hd
        for s in wall_slices(grid, j):
            res[s] = 0.0
        out.append(res)
    return out


def magnetic_force(grid: Grid, w: np.ndarray, m: np.ndarray) -> list:
    """Face force ``f`` with ``(u, f)_faces = -(w, advect_cells_skew(u, m))_cells`` for all ``u``.

    With ``w`` the tangential Laplacian of ``m`` this is the discrete
    ``-div(grad m ⊙ grad m)`` up to a gradient (absorbed by the pressure).
    """
    _require_box(grid)
    out = []
    for d in range(3):
        n = grid.dims[d]
        a = _sl(4, d + 1, 0, n - 1)
        b = _sl(4, d + 1, 1, n)
        f = np.zeros(grid.face_shape(d))
        f[interior_faces(grid, d)] = -0.5 * (
            (w[a] * m[b]).sum(axis=0) - (w[b] * m[a]).sum(axis=0)
        ) / grid.spacing[d]
        out.append(f)
    return out


def face_dot(grid: Grid, u: list, v: list) -> float:
    """Volume-weighted inner product over interior faces."""
    V = grid.cell_volume
    tot = 0.0
    for d in range(3):
        s = interior_faces(grid, d)
        tot += float(np.sum(u[d][s] * v[d][s]))
    return tot * V


def cell_dot(grid: Grid, a: np.ndarray, b: np.ndarray) -> float:
    prod = a * b
    if prod.ndim > 3:
        prod = prod.reshape((-1,) + grid.dims).sum(axis=0)
    return float(np.sum(prod[grid.cell_mask])) * grid.cell_volume


# ---------------------------------------------------------------------------
# heat flux and LLG right-hand side


def face_temperature_gradient(grid: Grid, theta: np.ndarray) -> list:
    """Full gradient on interior faces: normal two-point difference, tangential averages.

    Returns a list over face orientations ``d`` of arrays ``(3, *face_shape(d))``;
    wall faces are zero.
    """
    _require_box(grid)
    gc = grad_cell(grid, theta, "neumann")
    out = []
    for d in range(3):
        g = np.zeros((3,) + grid.face_shape(d))
        inner = (slice(None),) + interior_faces(grid, d)
        gi = np.empty((3,) + g[inner].shape[1:])
        for e in range(3):
            if e == d:
                gi[e] = np.diff(theta, axis=d) / grid.spacing[d]
            else:
                gi[e] = _faces_to_cells(gc[e], d)
        g[inner] = gi
        out.append(g)
    return out


def cell_K(grid: Grid, state, laws) -> np.ndarray:
    ucell = face_to_cell(grid, state.u) if grid.is_box else np.zeros_like(state.m)
    return laws.K(ucell, state.F, state.theta, state.m)


def heat_flux(grid: Grid, state, laws, K: np.ndarray | None = None) -> list:
    """Generalized Fourier flux ``q = -K grad theta`` on faces.

    Face conductivity is the mean of the adjacent cell matrices. The flux on
    wall faces is set to zero, which imposes ``q . nu = 0``. Raises if any cell
    conductivity falls below the positive-definiteness floor.
    """
    _require_box(grid)
    theta = state.theta
    if np.any(theta <= 0):
        raise CoefficientError("heat flux needs theta > 0")
    if K is None:
        K = cell_K(grid, state, laws)
    check_conductivity(K, laws, theta, state.m)
    return flux_from_conductivity(grid, theta, K)


def flux_from_conductivity(grid: Grid, theta: np.ndarray, K: np.ndarray) -> list:
    """``-K_f grad_f theta`` on interior faces for a given cell conductivity field; walls zero.

    Linear in ``theta``; performs no positivity checks.
    """
    grads = face_temperature_gradient(grid, theta)
    out = []
    for d in range(3):
        n = grid.dims[d]
        inner = (slice(None),) + interior_faces(grid, d)
        Kf = 0.5 * (K[_sl(5, d + 2, 0, n - 1)] + K[_sl(5, d + 2, 1, n)])
        q = np.zeros_like(grads[d])
        q[inner] = -np.einsum("ij...,j...->i...", Kf, grads[d][inner])
        out.append(q)
    return out


def check_conductivity(K, laws, theta, m):
    """Raise if the smallest eigenvalue of K drops below the law's floor.

    The default ``h I + k m⊗m`` uses its closed-form spectrum; a custom map is
    checked with a batched symmetric eigensolve.
    """
    if laws.K_fn is None:
        lam = laws.K_min_eigenvalue(theta, m)
    else:
        mats = np.moveaxis(K.reshape(3, 3, -1), -1, 0)
        lam = float(np.linalg.eigvalsh(0.5 * (mats + np.swapaxes(mats, 1, 2)))[:, 0].min())
    if lam < laws.c_floor:
        raise CoefficientError(f"conductivity eigenvalue {lam:.3e} below floor {laws.c_floor:.3e}")


def heat_flux_divergence(grid: Grid, q: list) -> np.ndarray:
    """``div q`` from the normal components of a face flux."""
    return sum(np.diff(q[d][d], axis=d) / grid.spacing[d] for d in range(3))


def llg_rhs(grid: Grid, state, laws, constraint_tol: float = 1e-8) -> np.ndarray:
    """``-alpha m x (m x lap m) - beta m x lap m - u . grad m``.

    Advection uses the skew centered stencil (box grids only).
    """
    m = state.m
    _check_unit(grid, m, constraint_tol)
    lap = laplacian(grid, m, "neumann")
    a = laws.alpha(state.theta)
    b = laws.beta(state.theta)
    mxl = cross(m, lap)
    rhs = -a * cross(m, mxl) - b * mxl
    if grid.is_box and any(np.any(c) for c in state.u):
        rhs = rhs - advect_cells_skew(grid, state.u, m)
    return _active(grid, rhs)


def llg_rhs_rewritten(grid: Grid, state, laws) -> np.ndarray:
    """``(alpha I - beta M(m)) lap m + alpha |grad m|^2 m - u . grad m``.

    ``|grad m|^2`` is taken from central differences, an independent stencil
    from the one implicit in :func:`llg_rhs`.
    """
    m = state.m
    lap = laplacian(grid, m, "neumann")
    a = laws.alpha(state.theta)
    b = laws.beta(state.theta)
    gm = grad_cell(grid, m, "neumann")
    gsq = (gm**2).sum(axis=(0, 1))
    rhs = a * lap - b * cross(m, lap) + a * gsq * m
    if grid.is_box and any(np.any(c) for c in state.u):
        rhs = rhs - advect_cells_skew(grid, state.u, m)
    return _active(grid, rhs)


def _check_unit(grid, m, tol):
    dev = np.abs(np.sqrt((m**2).sum(axis=0)) - 1.0)[grid.cell_mask]
    if dev.size and dev.max() > tol:
        raise ConstraintError(f"| |m| - 1 | = {dev.max():.3e} exceeds {tol:.1e}")
