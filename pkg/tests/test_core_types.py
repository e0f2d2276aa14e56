import numpy as np
import pytest

from magnetotherm import GridError, check_state, make_grid, make_laws, validate_laws, zero_state
from magnetotherm.grid import grid_from_spec
from magnetotherm.laws import Affine, MaterialLaws

from helpers import box, shell


class TestGrid:
    def test_box_counts_and_axis_aligned_normals(self):
        g = make_grid({"kind": "box_noslip", "dims": 8, "spacing": 0.125})
        assert g.n_active == 512
        assert g.lengths == (1.0, 1.0, 1.0)
        faces = g.boundary_faces()
        assert len(faces) == 6 * 64
        for _, axis, side, normal in faces:
            expected = np.zeros(3)
            expected[axis] = side
            assert np.array_equal(normal, expected)

    def test_shell_active_count_matches_enumeration(self):
        g = shell(16)
        h = 2.0 / 16
        c = -1.0 + h * (np.arange(16) + 0.5)
        count = sum(1 for x in c for y in c for z in c if 0.5 <= np.sqrt(x * x + y * y + z * z) <= 1.0)
        assert g.n_active == count

    def test_shell_normals_are_radial_unit_vectors(self):
        g = shell(16)
        touching = g.cell_mask & ~g.interior_mask
        nrm = g.cell_normals[:, touching]
        np.testing.assert_allclose(np.sqrt((nrm**2).sum(axis=0)), 1.0, atol=1e-14)

    @pytest.mark.parametrize(
        "spec",
        [
            {"kind": "box_noslip", "dims": [2, 8, 8], "spacing": 0.1},
            {"kind": "box_noslip", "dims": 8, "spacing": 0.0},
            {"kind": "box_noslip", "dims": 8, "spacing": [0.1, -0.1, 0.1]},
            {"kind": "shell_masked", "n": 16, "inner_radius": 0.9, "outer_radius": 0.5},
            {"kind": "shell_masked", "n": 16, "inner_radius": 0.5, "outer_radius": 1.5},
            {"kind": "shell_masked", "n": 4, "inner_radius": 0.95, "outer_radius": 1.0},
            {"kind": "cylinder"},
        ],
    )
    def test_invalid_specs_are_rejected(self, spec):
        with pytest.raises(GridError):
            make_grid(spec)

    def test_construction_is_deterministic(self):
        a, b = shell(12), shell(12)
        assert np.array_equal(a.cell_mask, b.cell_mask)
        assert np.array_equal(a.cell_normals, b.cell_normals)
        assert a.boundary_faces() == b.boundary_faces()

    @pytest.mark.parametrize("g", [box(5, 2.0), shell(10, 0.4, 0.9, 1.0)])
    def test_spec_round_trip(self, g):
        r = grid_from_spec(g.spec())
        assert r.dims == g.dims and r.spacing == g.spacing and r.origin == g.origin
        assert np.array_equal(r.cell_mask, g.cell_mask)


class TestLaws:
    def test_constant_viscosity_margin(self):
        laws = make_laws({"preset": "unit", "mu_floor": 0.5})
        rep = validate_laws(laws)
        assert rep["mu"]["passed"] and rep["mu"]["margin"] == pytest.approx(0.5)

    def test_indefinite_conductivity_fails(self):
        laws = make_laws({"preset": "unit", "h": 1.0, "k": -2.0})
        rep = validate_laws(laws)
        assert not rep["K"]["passed"] and not rep["passed"]
        # eigenvalues of I - 2 e1 e1^T are {-1, 1, 1}
        assert rep["K"]["margin"] == pytest.approx(-1.0 - laws.c_floor)
        assert laws.K_min_eigenvalue(np.array([1.0]), np.array([[1.0], [0.0], [0.0]])) == pytest.approx(-1.0)

    def test_quadratic_damping_above_floor(self):
        base = make_laws({"preset": "unit"})
        laws = MaterialLaws(base.mu, base.kappa, lambda t: 0.1 + np.asarray(t) ** 2, base.beta, base.h_fn,
                            base.k_fn, alpha_floor=0.1)
        rep = validate_laws(laws, (0.5, 2.0))
        assert rep["alpha"]["passed"]
        assert rep["alpha"]["margin"] == pytest.approx(0.25)

    def test_conductivity_matrix_is_h_plus_k_outer(self):
        laws = make_laws({"preset": "unit", "h": 1.0, "k": 0.5})
        m = np.array([0.0, 0.6, 0.8])[:, None]
        K = laws.K(None, None, np.array([1.0]), m)[..., 0]
        np.testing.assert_allclose(K, np.eye(3) + 0.5 * np.outer(m[:, 0], m[:, 0]), atol=1e-15)

    def test_affine_coefficient(self):
        assert Affine(0.8, 0.2)(2.0) == pytest.approx(1.2)

    def test_unknown_preset_and_keys(self):
        with pytest.raises(ValueError):
            make_laws({"preset": "nope"})
        with pytest.raises(ValueError):
            make_laws({"viscosity": 1.0})


class TestStateChecker:
    def test_equilibrium_state_is_admissible(self, grid8):
        assert check_state(zero_state(grid8), projection_tol=1e-12) == []

    def test_negated_temperature_cell_is_flagged(self, grid8):
        st = zero_state(grid8)
        st.theta[3, 4, 5] = -1.0
        problems = check_state(st)
        assert len(problems) == 1 and "theta" in problems[0] and "(3, 4, 5)" in problems[0]

    def test_wall_velocity_is_flagged(self, grid8):
        st = zero_state(grid8)
        st.u[1][2, 0, 3] = 1e-3
        problems = check_state(st)
        assert len(problems) == 1 and "wall" in problems[0]

    def test_divergence_only_checked_when_requested(self, grid8):
        st = zero_state(grid8)
        st.u[0][4, 2, 2] = 1.0
        assert check_state(st) == []
        assert "divergence" in check_state(st, projection_tol=1e-10)[0]

    def test_unconstrained_state_skips_sphere_check(self, grid8):
        st = zero_state(grid8)
        st.m *= 2.0
        assert "| |m| - 1 |" in check_state(st)[0]
        st.sphere_constrained = False
        assert check_state(st) == []
