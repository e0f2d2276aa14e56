import numpy as np
import pytest

from magnetotherm import CoefficientError, ConstraintError, SolverError, equilibria as eq, make_laws, zero_state
from magnetotherm.experiments import order_fit
from magnetotherm.initial import smooth_state

from helpers import box, random_unit, shell


def hedgehog_state(n):
    g = shell(n)
    st = zero_state(g)
    st.m = eq.hedgehog(g)
    return st


def radius(g):
    return np.sqrt((np.array(g.cell_centers()) ** 2).sum(axis=0))


def cubic_tangent_field(st):
    # odd and without cubic symmetry, so it pairs with the stencil's anisotropic error
    X, Y, Z = st.grid.cell_centers()
    v = np.stack([X**3 + Y, 2 * Y**3 - X * Z**2, Z**3 + X * Y * Z])
    n = v - (v * st.m).sum(axis=0) * st.m
    return n * eq.radial_bump(st.grid, 0.75, 0.1)


class TestHarmonicMaps:
    def test_residual_of_constant_is_zero(self, grid8):
        m = zero_state(grid8, 1.0, (0.0, 0.6, 0.8)).m
        _, l2, mx = eq.harmonic_residual(grid8, m)
        assert l2 == 0 and mx == 0

    def test_residual_of_random_field_is_positive(self, grid8, rng):
        _, l2, mx = eq.harmonic_residual(grid8, random_unit(rng, (3,) + grid8.dims))
        assert l2 > 0.1 and mx > 0.1

    def test_residual_requires_unit_field(self, grid8):
        with pytest.raises(ConstraintError):
            eq.harmonic_residual(grid8, 1.5 * zero_state(grid8).m)

    def test_hedgehog_weighted_residual_order(self):
        hs, errs = [], []
        for n in (16, 24, 32):
            g = shell(n)
            hs.append(g.h_min)
            errs.append(eq.weighted_residual_norms(g, eq.hedgehog(g), eq.radial_bump(g, 0.75, 0.1))[0])
        assert order_fit(hs, errs) >= 1.9

    def test_flow_from_constant_returns_immediately(self, grid8):
        m = zero_state(grid8).m
        out = eq.harmonic_map_solve(grid8, m)
        assert out.iterations == 0 and np.array_equal(out.m, m)

    def test_flow_relaxes_perturbation_to_a_constant(self):
        g = box(8)
        m = smooth_state(g, 0.0).m
        X, Y, Z = g.cell_centers()
        m = m + 0.2 * np.stack([np.cos(np.pi * X), np.cos(np.pi * Y) * np.cos(np.pi * Z), 0 * X])
        m /= np.sqrt((m**2).sum(axis=0))
        out = eq.harmonic_map_solve(g, m, tol=1e-9)
        assert out.residual <= 1e-9
        assert np.ptp(out.m.reshape(3, -1), axis=1).max() <= 1e-6
        assert np.abs(np.sqrt((out.m**2).sum(axis=0)) - 1).max() <= 1e-13

    def test_nonconvergence_reports_history(self, grid8, rng):
        with pytest.raises(SolverError) as exc:
            eq.harmonic_map_solve(grid8, random_unit(rng, (3,) + grid8.dims), max_iter=25, record_every=5)
        assert exc.value.iterations == 25 and len(exc.value.history) == 6 and exc.value.residual > 0

    def test_tangent_noise_is_unit_and_free_of_conformal_modes(self):
        st = hedgehog_state(12)
        g = st.grid
        m = eq.tangent_noise(g, st.m, 0.05, rng=3)
        mask = g.cell_mask
        assert np.abs(np.sqrt((m[:, mask] ** 2).sum(axis=0)) - 1).max() <= 1e-14
        q = eq.conformal_modes(g, st.m)
        n = ((m - st.m) * mask).ravel()
        assert np.abs(q.T @ n).max() <= 0.05 * 0.05 * np.linalg.norm(n)


class TestPressureAndMultipliers:
    def test_pressure_of_constant_is_zero(self, eq_state):
        assert np.abs(eq.equilibrium_pressure(eq_state.grid, eq_state.m)).max() == 0

    def test_hedgehog_pressure_is_minus_inverse_square_radius(self):
        errs, hs = [], []
        for n in (16, 32):
            st = hedgehog_state(n)
            g = st.grid
            p = eq.equilibrium_pressure(g, st.m)
            band = eq.annulus_mask(g, 0.6, 0.9)
            d = (p + 1 / radius(g) ** 2)[band]
            errs.append(np.abs(d - d.mean()).max())
            hs.append(g.h_min)
        assert errs[1] < errs[0] and errs[1] <= 0.05

    def test_multiplier_examples(self, grid8):
        lam_E, lam_G = eq.lagrange_multipliers(grid8, 2.0, zero_state(grid8).m)
        assert lam_E == -0.5 and np.abs(lam_G).max() == 0
        lam_E, _ = eq.lagrange_multipliers(grid8, np.full(grid8.dims, np.e), zero_state(grid8).m)
        assert lam_E == pytest.approx(-1 / np.e, rel=1e-15)

    def test_hedgehog_multiplier_is_two_over_r_squared(self):
        st = hedgehog_state(32)
        g = st.grid
        _, lam_G = eq.lagrange_multipliers(g, 1.0, st.m)
        band = eq.annulus_mask(g, 0.6, 0.9)
        rel = np.abs(lam_G * radius(g) ** 2 / 2 - 1)[band]
        assert rel.max() <= 0.05

    def test_multiplier_rejects_bad_temperature(self, grid8):
        th = np.ones(grid8.dims)
        th[0, 0, 0] = 1.1
        with pytest.raises(ValueError):
            eq.lagrange_multipliers(grid8, th, zero_state(grid8).m)
        with pytest.raises(CoefficientError):
            eq.lagrange_multipliers(grid8, -1.0, zero_state(grid8).m)


def random_variation(rng, g, st):
    return eq.project_variation(st, eq.Variation(
        [rng.normal(size=g.face_shape(d)) for d in range(3)],
        rng.normal(size=(3, 3) + g.dims), rng.normal(size=g.dims), rng.normal(size=(3,) + g.dims)))


class TestVariations:
    def test_first_variation_vanishes_at_constant_equilibria(self, eq_state, rng):
        for _ in range(10):
            w = random_variation(rng, eq_state.grid, eq_state)
            assert abs(eq.first_variation_residual(eq_state, w)) <= 1e-13

    def test_first_variation_sees_kinetic_energy(self, eq_state, rng):
        st = eq_state.copy()
        st.u[0][3, 2, 2] = 0.5
        w = eq.zero_variation(st.grid)
        w.v = [c.copy() for c in st.u]
        expected = -1 / 1.3 * 0.25 * st.grid.cell_volume
        assert eq.first_variation_residual(st, w) == pytest.approx(expected, rel=1e-13)

    def test_first_variation_at_hedgehog_is_second_order(self):
        hs, vals = [], []
        for n in (16, 24, 32):
            st = hedgehog_state(n)
            w = eq.zero_variation(st.grid)
            w.n = cubic_tangent_field(st)
            hs.append(st.grid.h_min)
            vals.append(abs(eq.first_variation_residual(st, w)))
        assert order_fit(hs, vals) >= 1.9

    def test_second_variation_is_negative_at_constant_m(self, eq_state, rng):
        for _ in range(10):
            assert eq.second_variation_form(eq_state, random_variation(rng, eq_state.grid, eq_state)) < 0
        assert eq.second_variation_form(eq_state, eq.zero_variation(eq_state.grid)) == 0

    def test_second_variation_kernel_is_constant_tangent_n(self, eq_state):
        # rotating the constant magnetization costs nothing to second order
        w = eq.zero_variation(eq_state.grid)
        w.n[0] = 1.0
        assert abs(eq.second_variation_form(eq_state, w)) <= 1e-14

    def test_stab_functional_examples(self, grid8, rng):
        st = hedgehog_state(16)
        assert abs(eq.stab_functional(st.grid, st.m, 0.3 * st.m)) <= 1e-12
        m = zero_state(grid8).m
        n = rng.normal(size=m.shape)
        assert eq.stab_functional(grid8, m, n) > 0
        assert eq.stab_functional(grid8, m, np.zeros_like(n)) == 0

    def test_is_equilibrium(self, eq_state, smooth8):
        assert eq.is_equilibrium(eq_state)
        assert not eq.is_equilibrium(smooth8)


class TestSymbol:
    def test_example_spectrum(self):
        out = eq.symbol_spectrum(1.0, 2.0, [0.0, 0.0, 1.0])
        assert sorted(out["numeric"], key=lambda z: z.imag) == pytest.approx([1 - 2j, 1 + 0j, 1 + 2j], abs=1e-14)
        assert out["max_diff"] <= 1e-14
        assert np.tan(out["sector_angle"]) == pytest.approx(2.0)
        assert out["tan_sector_angle"] == pytest.approx(2.0)

    def test_zero_precession_is_real(self):
        out = eq.symbol_spectrum(0.7, 0.0, [1.0, 2.0, 2.0])
        assert np.abs(out["numeric"].imag).max() <= 1e-15 and out["sector_angle"] == 0

    def test_random_samples_match_formula(self, rng):
        for _ in range(200):
            out = eq.symbol_spectrum(rng.uniform(0.05, 5), rng.uniform(-5, 5), rng.normal(size=3))
            assert out["max_diff"] <= 1e-12
            assert abs(out["sector_angle"] - out["numeric_sector_angle"]) <= 1e-12

    @pytest.mark.parametrize("alpha", [0.0, -0.5])
    def test_nonpositive_damping_rejected(self, alpha):
        with pytest.raises(CoefficientError):
            eq.symbol_spectrum(alpha, 1.0, [0, 0, 1])

    def test_law_driven_spectrum(self):
        laws = make_laws({"preset": "default"})
        out = eq.llg_symbol_spectrum(1.0, [0.0, 0.6, 0.8], laws)
        assert out["formula"][1].real == pytest.approx(1.0) and out["formula"][2].imag == pytest.approx(0.5)


@pytest.fixture(scope="module")
def smooth_op():
    st = smooth_state(box(5), 0.1)
    st.theta = st.theta + 0.1 * st.grid.cell_centers()[0]
    return eq.assemble_frozen_operator(st, make_laws({"preset": "default"}))


@pytest.fixture(scope="module")
def eq_op():
    st = zero_state(box(5), 1.3, (0.0, 0.6, 0.8))
    return eq.assemble_frozen_operator(st, make_laws({"preset": "default"}))


class TestFrozenOperator:
    def test_sparse_matches_matrix_free(self, smooth_op):
        rng = np.random.default_rng(5)
        for _ in range(20):
            x = rng.normal(size=smooth_op.layout.size)
            x /= np.linalg.norm(x)
            assert np.abs(smooth_op.matvec(x) - smooth_op.apply_blocks(x)).max() <= 1e-12

    def test_coupling_blocks_vanish_at_constant_equilibria(self, eq_op):
        assert eq_op.blocks["C1"].nnz == 0 or abs(eq_op.blocks["C1"]).max() == 0
        assert eq_op.blocks["C3"].nnz == 0 or abs(eq_op.blocks["C3"]).max() == 0

    @pytest.mark.parametrize("block", ["u", "m"])
    def test_block_inputs_stay_in_their_rows(self, eq_op, block):
        rng = np.random.default_rng(6)
        lo, hi = eq_op.layout.blocks[block]
        x = np.zeros(eq_op.layout.size)
        x[lo:hi] = rng.normal(size=hi - lo)
        y = eq_op.matvec(x)
        assert np.abs(y[:lo]).max(initial=0) <= 1e-12 and np.abs(y[hi:]).max(initial=0) <= 1e-12
        assert np.abs(y[lo:hi]).max() > 0

    def test_layout_round_trip(self, smooth_op, rng):
        L = smooth_op.layout
        x = rng.normal(size=L.size)
        assert np.array_equal(L.pack(*L.unpack(x)), x)

    def test_inadmissible_base_state_rejected(self):
        st = zero_state(box(4))
        st.theta[0, 0, 0] = -1.0
        with pytest.raises(ConstraintError):
            eq.assemble_frozen_operator(st, make_laws({"preset": "default"}))

    def test_normal_stability_on_small_grid(self):
        st = zero_state(box(4), 1.0, (0, 0, 1))
        rep = eq.normal_stability_check(st, make_laws({"preset": "default"}))
        assert rep["min_real_part"] >= -1e-8
        assert rep["kernel_dimension"] == 4 and rep["semisimple"]
        assert rep["kernel_reconstruction_error"] <= 1e-8

    def test_stability_check_needs_equilibrium(self, smooth8):
        with pytest.raises(ValueError):
            eq.normal_stability_check(smooth8, make_laws({"preset": "default"}))
