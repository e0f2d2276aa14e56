import itertools

import numpy as np
import pytest
from scipy import linalg

from magnetotherm import SolverError, ops
from magnetotherm.projection import PoissonSolver, helmholtz_project, neumann_laplacian_matrix, pressure_poisson

from helpers import box

TOL = 1e-10


def random_faces(rng, g):
    return [rng.normal(size=g.face_shape(d)) for d in range(3)]


def dense_oracle(g, v):
    """Mean-zero pressure from a bordered dense LU solve, assembled cell by cell."""
    n = g.dims
    N = int(np.prod(n))
    idx = np.arange(N).reshape(n)
    A = np.zeros((N + 1, N + 1))
    b = np.zeros(N + 1)
    for c in itertools.product(*(range(k) for k in n)):
        row = idx[c]
        for d in range(3):
            h2 = g.spacing[d] ** 2
            for s in (-1, 1):
                nb = list(c)
                nb[d] += s
                if 0 <= nb[d] < n[d]:
                    A[row, row] -= 1 / h2
                    A[row, idx[tuple(nb)]] += 1 / h2
            hi = list(c)
            hi[d] += 1
            flux_hi = v[d][tuple(hi)] if c[d] + 1 < n[d] else 0.0
            flux_lo = v[d][c] if c[d] > 0 else 0.0
            b[row] += (flux_hi - flux_lo) / g.spacing[d]
    A[N, :N] = A[:N, N] = 1.0
    x = linalg.lu_solve(linalg.lu_factor(A), b)
    return x[:N].reshape(n)


def test_gradient_input_recovers_potential(rng):
    g = box(12)
    phi = rng.normal(size=g.dims)
    pi, _ = pressure_poisson(g, ops.grad_scalar(g, phi, "neumann"))
    np.testing.assert_allclose(pi, phi - phi.mean(), atol=1e-9)


def test_solenoidal_input_gives_zero_pressure(rng):
    g = box(12)
    w, _ = helmholtz_project(g, random_faces(rng, g))
    pi, _ = pressure_poisson(g, w)
    assert np.abs(pi).max() <= TOL


def test_dense_lu_oracle_8(rng):
    g = box(8)
    v = random_faces(rng, g)
    pi, _ = pressure_poisson(g, v)
    assert np.abs(pi - dense_oracle(g, v)).max() <= 1e-8


def test_sparse_matrix_matches_stencil(rng):
    g = box(6, 1.7)
    f = rng.normal(size=g.dims)
    np.testing.assert_allclose((neumann_laplacian_matrix(g) @ f.ravel()).reshape(g.dims),
                               ops.laplacian(g, f, "neumann"), atol=1e-10)


def test_projection_examples(rng):
    g = box(16)
    phi = rng.normal(size=g.dims)
    grad_part, _ = helmholtz_project(g, ops.grad_scalar(g, phi, "neumann"))
    assert max(np.abs(c).max() for c in grad_part) <= 1e-9

    v = random_faces(rng, g)
    p1, _ = helmholtz_project(g, v)
    assert np.abs(ops.div_vec(g, p1)).max() <= TOL
    for d in range(3):
        for s in ops.wall_slices(g, d):
            assert np.abs(p1[d][s]).max() == 0
    p2, _ = helmholtz_project(g, p1)
    assert max(np.abs(a - b).max() for a, b in zip(p1, p2)) <= 10 * TOL


def test_discrete_orthogonality(rng):
    g = box(10)
    p, _ = helmholtz_project(g, random_faces(rng, g))
    gphi = ops.grad_scalar(g, rng.normal(size=g.dims), "neumann")
    inner = abs(ops.face_dot(g, p, gphi))
    scale = np.sqrt(ops.face_dot(g, p, p) * ops.face_dot(g, gphi, gphi))
    assert inner <= TOL * scale


@pytest.mark.parametrize("pc", ["none", "diagonal", "dct"])
def test_preconditioners_agree(rng, pc):
    g = box(8)
    v = random_faces(rng, g)
    ref, _ = pressure_poisson(g, v, PoissonSolver(g, tol=1e-12, preconditioner="dct"))
    pi, info = pressure_poisson(g, v, PoissonSolver(g, tol=1e-12, preconditioner=pc))
    assert np.abs(pi - ref).max() <= 1e-10
    assert info.residual <= 1e-12


def test_nonconvergence_carries_residual(rng):
    g = box(8)
    with pytest.raises(SolverError) as exc:
        pressure_poisson(g, random_faces(rng, g), PoissonSolver(g, tol=1e-12, max_iter=3, preconditioner="none"))
    assert exc.value.residual > 1e-12 and exc.value.iterations == 3 and len(exc.value.history) == 4


def test_invalid_solver_settings():
    g = box(4)
    with pytest.raises(ValueError):
        PoissonSolver(g, tol=0.0)
    with pytest.raises(ValueError):
        PoissonSolver(g, preconditioner="multigrid")
