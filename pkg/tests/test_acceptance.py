"""Acceptance criteria 1-12 at their stated tolerances.

Each criterion prints one ``CRITERION n: PASS|FAIL ...`` line. Run with
``pytest tests/test_acceptance.py -s`` or ``python tests/test_acceptance.py``.
Criteria 1 and 2 share one 32^3 consistency run (several minutes).
"""

import functools
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from magnetotherm import cfl_dt, equilibria as eq, make_laws, ops, step, zero_state  # noqa: E402
from magnetotherm.config import DEFAULTS  # noqa: E402
from magnetotherm.experiments import order_fit, run_scenario, scenario_config  # noqa: E402
from magnetotherm.projection import helmholtz_project, pressure_poisson  # noqa: E402

from helpers import box, shell  # noqa: E402
from test_projection import dense_oracle  # noqa: E402

THR = DEFAULTS["thresholds"]


def _checks(res, *names):
    chosen = [c for c in res.checks if not names or c.name in names]
    ok = all(c.passed for c in chosen)
    detail = "; ".join(f"{c.name}={_fmt(c.value)}" for c in chosen)
    return ok, detail


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.3g}"
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_fmt(x) for x in v) + "]"
    return str(v)


@functools.lru_cache(maxsize=1)
def consistency_run():
    cfg = scenario_config("consistency", {"grid": {"dims": [32, 32, 32]}, "time": {"n_steps": 2000, "safety": 0.4}})
    return run_scenario(cfg, "consistency")


def criterion_1():
    return _checks(consistency_run(), "energy_drift", "drift_ratio")


def criterion_2():
    return _checks(consistency_run(), "entropy_production_nonnegative", "entropy_slack", "entropy_balance",
                   "entropy_balance_shrinks")


def criterion_3():
    return _checks(run_scenario(scenario_config("sphere_constraint"), "sphere_constraint"))


def criterion_4():
    return _checks(run_scenario(scenario_config("max_principle"), "max_principle"))


def criterion_5():
    laws = make_laws({"preset": "default"})
    worst = 0.0
    for theta0, m0 in [(1.0, (0, 0, 1)), (1.3, (0.0, 0.6, 0.8)), (0.4, (1, 1, 1)), (2.5, (-1, 0, 0))]:
        st = zero_state(box(8), theta0, m0)
        dt = cfl_dt(st, laws)
        for _ in range(100):
            nxt = step(st, laws, dt)
            worst = max(worst, max(float(np.abs(a - b).max()) for a, b in zip(nxt.arrays(), st.arrays())))
            st = nxt
    return worst <= THR["fixed_point_max"], f"max per-step change {worst:.3g} over 4 members x 100 steps"


def criterion_6():
    res = run_scenario(scenario_config("hedgehog"), "hedgehog")
    return _checks(res, "hedgehog_residual_order")


def criterion_7():
    return _checks(run_scenario(scenario_config("symbol_check"), "symbol_check"))


def criterion_8():
    return _checks(run_scenario(scenario_config("spectrum"), "spectrum"))


def criterion_9():
    return _checks(run_scenario(scenario_config("decay_to_equilibrium"), "decay_to_equilibrium"))


def criterion_10():
    tol = DEFAULTS["tolerances"]["projection_tol"]
    idem_max = THR["idempotence_factor"] * tol
    rng = np.random.default_rng(10)
    g = box(16)
    v = [rng.normal(size=g.face_shape(d)) for d in range(3)]
    p1, _ = helmholtz_project(g, v)
    p2, _ = helmholtz_project(g, p1)
    idem = max(float(np.abs(a - b).max()) for a, b in zip(p1, p2))
    div = float(np.abs(ops.div_vec(g, p1)).max())
    gp, _ = helmholtz_project(g, ops.grad_scalar(g, rng.normal(size=g.dims), "neumann"))
    annihil = max(float(np.abs(c).max()) for c in gp)
    g8 = box(8)
    v8 = [rng.normal(size=g8.face_shape(d)) for d in range(3)]
    pi, _ = pressure_poisson(g8, v8)
    lu = float(np.abs(pi - dense_oracle(g8, v8)).max())
    ok = idem <= idem_max and div <= tol and annihil <= idem_max and lu <= THR["projection_lu_max"]
    return ok, f"idempotence {idem:.3g}; divergence {div:.3g}; gradient {annihil:.3g}; LU {lu:.3g}"


def criterion_11():
    res = run_scenario(scenario_config("manufactured_convergence"), "manufactured_convergence")
    return _checks(res, "legendre_identity", "order_divergence_identity")


def _hedgehog_state(n):
    st = zero_state(shell(n))
    st.m = eq.hedgehog(st.grid)
    return st


def criterion_12():
    rng = np.random.default_rng(12)
    # exact at constant equilibria for arbitrary admissible variations
    base = zero_state(box(8), 1.3, (0.0, 0.6, 0.8))
    g = base.grid

    def sample():
        w = eq.Variation([rng.normal(size=g.face_shape(d)) for d in range(3)], rng.normal(size=(3, 3) + g.dims),
                         rng.normal(size=g.dims), rng.normal(size=(3,) + g.dims))
        return eq.project_variation(base, w)

    exact = max(abs(eq.first_variation_residual(base, sample())) for _ in range(20))
    second = max(eq.second_variation_form(base, sample()) for _ in range(50))

    # O(h^2) at the hedgehog for a smooth tangent field localized in the shell
    hs, vals = [], []
    for n in (16, 24, 32):
        st = _hedgehog_state(n)
        X, Y, Z = st.grid.cell_centers()
        v = np.stack([X**3 + Y, 2 * Y**3 - X * Z**2, Z**3 + X * Y * Z])
        w = eq.zero_variation(st.grid)
        w.n = (v - (v * st.m).sum(axis=0) * st.m) * eq.radial_bump(st.grid, 0.75, 0.1)
        hs.append(st.grid.h_min)
        vals.append(abs(eq.first_variation_residual(st, w)))
    order = order_fit(hs, vals)
    ok = exact <= THR["fixed_point_max"] and order >= THR["order_min"] and second < 0
    return ok, f"constant equilibria {exact:.3g}; hedgehog order {order:.3f}; max second variation {second:.3g}"


CRITERIA = {n: globals()[f"criterion_{n}"] for n in range(1, 13)}


def _line(n, ok, detail):
    return f"CRITERION {n}: {'PASS' if ok else 'FAIL'}  {detail}"


@pytest.mark.slow
@pytest.mark.parametrize("n", list(CRITERIA))
def test_criterion(n, capsys):
    ok, detail = CRITERIA[n]()
    with capsys.disabled():
        print("\n" + _line(n, ok, detail))
    assert ok, detail


if __name__ == "__main__":
    failed = 0
    for n, fn in CRITERIA.items():
        ok, detail = fn()
        failed += not ok
        print(_line(n, ok, detail), flush=True)
    sys.exit(1 if failed else 0)
