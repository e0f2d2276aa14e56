"""Scenario drivers: each runs one property check and reports pass/fail against config thresholds.

Every scenario has a default parameter set in :data:`SCENARIO_DEFAULTS` sized
to finish within about a minute on one core. :func:`run_scenario` returns a
:class:`ScenarioResult`; :func:`write_outputs` stores its CSV tables, the JSON
summary and the figures.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import equilibria as eq
from . import ops, thermo
from .checkpoint import load_checkpoint, save_checkpoint
from .config import DEFAULTS, SimConfig, _merge, from_dict
from .errors import ConfigError
from .grid import make_grid
from .initial import initial_state, smooth_state
from .state import FieldState, zero_state
from .timestepper import StepScheme, cfl_dt, step

SCENARIOS = (
    "consistency",
    "max_principle",
    "sphere_constraint",
    "decay_to_equilibrium",
    "hedgehog",
    "spectrum",
    "symbol_check",
    "manufactured_convergence",
)

SCENARIO_DEFAULTS: dict = {
    "consistency": {
        "grid": {"dims": [16, 16, 16]},
        "initial": {"preset": "smooth", "amplitude": 0.05},
        "time": {"n_steps": 800, "output_every": 1},
        "params": {"coarse_check": True},
    },
    "max_principle": {
        "grid": {"dims": [16, 16, 16]},
        "initial": {"preset": "theta_bump", "bump_height": 1.0, "bump_width": 0.15, "tilt": 0.6},
        "time": {"n_steps": 1},
        "params": {"t_final": 0.02},
    },
    "sphere_constraint": {
        "grid": {"dims": [8, 8, 8]},
        "initial": {"preset": "random_m"},
        "time": {"n_steps": 10000, "output_every": 100},
        "params": {},
    },
    "decay_to_equilibrium": {
        "grid": {"dims": [24, 24, 24]},
        "initial": {"preset": "random", "amplitude": 1e-2},
        "time": {"n_steps": 2000, "output_every": 20},
        "params": {"tail_fraction": 0.5},
    },
    "hedgehog": {
        "grid": {"kind": "shell_masked", "n": 16, "inner_radius": 0.5, "outer_radius": 1.0, "half_width": 1.0},
        "initial": {"preset": "hedgehog", "amplitude": 0.05},
        "params": {"resolutions": [16, 24, 32], "bump_center": 0.75, "bump_half_width": 0.1, "max_iter": 20000},
    },
    "spectrum": {
        "grid": {"dims": [6, 6, 6]},
        "initial": {"preset": "equilibrium", "theta0": 1.0, "m0": [0.0, 0.0, 1.0]},
        "params": {},
    },
    "symbol_check": {
        "params": {"n_samples": 1000, "theta_range": [0.5, 2.0]},
    },
    "manufactured_convergence": {
        "params": {"resolutions": [16, 24, 32], "subdomain": [0.25, 0.75], "calibration_dims": [8, 16],
                   "calibration_steps": 200},
    },
}


def scenario_config(name: str, override: dict | None = None) -> SimConfig:
    """Defaults, then the scenario's defaults, then ``override`` (e.g. a parsed config file)."""
    if name not in SCENARIOS:
        raise ConfigError(f"unknown scenario {name!r}; known: {', '.join(SCENARIOS)}")
    base = _merge(DEFAULTS, SCENARIO_DEFAULTS[name])
    cfg = from_dict(override or {}, base)
    extra = set(cfg["params"]) - set(SCENARIO_DEFAULTS[name].get("params", {}))
    if extra:
        raise ConfigError(f"unknown params for scenario {name!r}: {sorted(extra)}")
    return cfg


# ---------------------------------------------------------------------------
# results


@dataclass
class Check:
    name: str
    passed: bool
    value: object
    rule: str

    def as_dict(self):
        return {"passed": bool(self.passed), "value": _jsonable(self.value), "rule": self.rule}


@dataclass
class ScenarioResult:
    scenario: str
    checks: list = field(default_factory=list)
    metrics: dict = field(default_factory=dict)
    tables: dict = field(default_factory=dict)  # stem -> (columns, rows)
    records: list = field(default_factory=list)
    config_hash: str = ""
    runtime_s: float = 0.0

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def check(self, name: str, passed, value, rule: str):
        self.checks.append(Check(name, bool(passed), value, rule))

    def summary(self) -> dict:
        return {
            "scenario": self.scenario,
            "passed": self.passed,
            "config_hash": self.config_hash,
            "runtime_s": self.runtime_s,
            "checks": {c.name: c.as_dict() for c in self.checks},
            "metrics": _jsonable(self.metrics),
        }


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else str(x)
    if isinstance(x, complex):
        return [x.real, x.imag]
    return x


# ---------------------------------------------------------------------------
# fits and distances


def order_fit(h, err) -> float:
    """Least-squares slope of ``log err`` against ``log h``."""
    h = np.asarray(h, dtype=float)
    err = np.asarray(err, dtype=float)
    if len(h) < 2 or np.any(err <= 0):
        raise ValueError("order fit needs at least two positive errors")
    return float(np.polyfit(np.log(h), np.log(err), 1)[0])


def decay_rate_fit(t, d, tail_fraction: float = 1.0) -> tuple[float, float]:
    """Exponential rate from the tail of a distance series.

    Fits ``log d = a - rate * t`` by least squares over the last
    ``tail_fraction`` of the samples (at least 10 samples in total and at least
    3 in the window). Returns ``(rate, r_squared)``; a perfectly fitted or
    constant series has ``r_squared = 1``.
    """
    t = np.asarray(t, dtype=float)
    d = np.asarray(d, dtype=float)
    if t.shape != d.shape or t.ndim != 1:
        raise ValueError("time and distance series must be 1D and of equal length")
    if len(t) < 10:
        raise ValueError(f"need at least 10 samples, got {len(t)}")
    if np.any(~(d > 0)):
        raise ValueError("distances must be positive to take logarithms")
    if not 0 < tail_fraction <= 1:
        raise ValueError("tail_fraction must lie in (0, 1]")
    k = max(3, int(round(tail_fraction * len(t))))
    tt, y = t[-k:], np.log(d[-k:])
    A = np.stack([tt, np.ones_like(tt)], axis=1)
    (slope, icpt), *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - (slope * tt + icpt)
    ss_tot = float(((y - y.mean()) ** 2).sum())
    ss_res = float((resid**2).sum())
    scale = max(1.0, float(np.abs(y).max())) ** 2 * len(y)
    if ss_tot <= 1e-28 * scale:
        r2 = 1.0
    else:
        r2 = 1.0 - ss_res / ss_tot
    rate = -float(slope)
    return (0.0 if abs(rate) < 1e-14 else rate), float(r2)


def distance_to_constant_equilibria(state: FieldState) -> float:
    """Discrete L2 norm of ``(u, F, theta - mean theta, m - mean m)``."""
    g = state.grid
    mask = g.cell_mask
    th = state.theta - state.theta[mask].mean()
    m = state.m - state.m[:, mask].mean(axis=1)[:, None, None, None]
    tot = ops.cell_dot(g, state.F, state.F) + ops.cell_dot(g, th, th) + ops.cell_dot(g, m, m)
    if g.is_box:
        tot += ops.face_dot(g, state.u, state.u)
    return float(np.sqrt(tot))


# ---------------------------------------------------------------------------
# trajectory helper


def _scheme(cfg: SimConfig) -> StepScheme:
    tol = cfg["tolerances"]
    return StepScheme(projection_tol=tol["projection_tol"], constraint_tol=tol["constraint_tol"], **cfg["scheme"])


def _fixed_dt(cfg: SimConfig, state, laws) -> float:
    t = cfg["time"]
    return float(t["dt"]) if t["policy"] == "fixed" else cfl_dt(state, laws, t["safety"])


def trajectory(state, laws, n_steps, dt, scheme, output_every=1, per_step=None, checkpoint=None):
    """Advance with a fixed ``dt``; return ``(final_state, records)``.

    ``dt=None`` recomputes the CFL step every step. Records are taken at the
    start, every ``output_every`` steps and at the end. ``per_step(state)``
    runs after every step; ``checkpoint(state)`` after every recorded step.
    """
    records = [thermo.diagnostics(state, laws)]
    for k in range(1, n_steps + 1):
        h = dt if dt is not None else cfl_dt(state, laws)
        state = step(state, laws, h, scheme)
        if per_step is not None:
            per_step(state)
        if k % output_every == 0 or k == n_steps:
            records.append(thermo.diagnostics(state, laws))
            if checkpoint is not None:
                checkpoint(state)
    return state, records


def _checkpointer(cfg, out_dir, name):
    every = int(cfg["time"]["checkpoint_every"])
    if out_dir is None or every <= 0:
        return None
    path = Path(out_dir) / f"{name}.ckpt"

    def save(state):
        if state.step % every == 0:
            save_checkpoint(state, path, cfg.hash())

    return save


# ---------------------------------------------------------------------------
# scenarios


def _consistency(cfg: SimConfig, res: ScenarioResult, out_dir=None, resume=None):
    thr = cfg["thresholds"]
    laws = cfg.laws()
    grid = cfg.grid()
    st0 = resume if resume is not None else initial_state(grid, cfg["initial"], cfg.seed)
    grid = st0.grid
    scheme = _scheme(cfg)
    n = int(cfg["time"]["n_steps"])
    every = int(cfg["time"]["output_every"])
    dt = _fixed_dt(cfg, st0, laws)
    r_min = [np.inf]

    def watch(s):
        r_min[0] = min(r_min[0], float(thermo.entropy_production_field(s, laws).min()))

    watch(st0)
    _, recs = trajectory(st0, laws, n, dt, scheme, every, watch, _checkpointer(cfg, out_dir, "consistency"))
    _, recs_half = trajectory(st0, laws, 2 * n, 0.5 * dt, scheme, 2 * every)
    rep = thermo.consistency_report(recs, thr["entropy_slack_c"], grid.h_min)
    rep_half = thermo.consistency_report(recs_half, thr["entropy_slack_c"], grid.h_min)
    ratio = rep["final_rel_E_drift"] / rep_half["final_rel_E_drift"] if rep_half["final_rel_E_drift"] > 0 else math.inf
    res.records = recs
    res.metrics.update(dt=dt, n_steps=n, h=grid.h_min, report=rep, report_half_dt=rep_half, drift_ratio=ratio,
                       r_min=r_min[0])
    res.check("energy_drift", rep["max_rel_E_drift"] <= thr["energy_drift_max"], rep["max_rel_E_drift"],
              f"<= {thr['energy_drift_max']}")
    res.check("drift_ratio", thr["drift_ratio_min"] <= ratio <= thr["drift_ratio_max"], ratio,
              f"in [{thr['drift_ratio_min']}, {thr['drift_ratio_max']}]")
    res.check("entropy_production_nonnegative", r_min[0] >= 0.0, r_min[0], ">= 0 exactly")
    res.check("entropy_slack", rep["entropy_violations"] == 0, rep["entropy_violations"],
              f"no decrease above {thr['entropy_slack_c']} (dt^2 + dt h^2)")
    res.check("entropy_balance", rep["entropy_balance_mismatch"] <= thr["entropy_balance_max"],
              rep["entropy_balance_mismatch"], f"<= {thr['entropy_balance_max']}")
    res.tables["half_dt"] = (list(thermo.CSV_COLUMNS), [r.row() for r in recs_half])

    if cfg["params"].get("coarse_check", True) and grid.is_box and min(grid.dims) >= 8 and resume is None:
        gspec = dict(cfg["grid"])
        gspec.pop("spacing", None)
        gspec["dims"] = [d // 2 for d in grid.dims]
        gspec.pop("n", None)
        cg = make_grid(gspec)
        cs = initial_state(cg, cfg["initial"], cfg.seed)
        T = n * dt
        nc = max(1, math.ceil(T / _fixed_dt(cfg, cs, laws)))
        _, crecs = trajectory(cs, laws, nc, T / nc, scheme, 1)
        crep = thermo.consistency_report(crecs, thr["entropy_slack_c"], cg.h_min)
        res.metrics["coarse_report"] = crep
        res.check("entropy_balance_shrinks", rep["entropy_balance_mismatch"] < crep["entropy_balance_mismatch"],
                  [crep["entropy_balance_mismatch"], rep["entropy_balance_mismatch"]], "base < coarse (dims / 2)")


def _max_principle(cfg: SimConfig, res: ScenarioResult, out_dir=None, resume=None):
    thr = cfg["thresholds"]
    laws = cfg.laws()
    scheme = _scheme(cfg)
    T = float(cfg["params"]["t_final"])
    c = thr["max_principle_c"]
    levels = []
    grid = cfg.grid()
    for level, g in enumerate((grid, make_grid({**cfg["grid"], "dims": [2 * d for d in grid.dims]}))):
        st = initial_state(g, cfg["initial"], cfg.seed)
        th0 = float(st.theta[g.cell_mask].min())
        dt0 = _fixed_dt(cfg, st, laws)
        n = max(1, math.ceil(T / dt0))
        dt = T / n
        mins = [th0]

        def watch(s):
            mins.append(float(s.theta[g.cell_mask].min()))

        trajectory(st, laws, n, dt, scheme, n, watch)
        under = max(0.0, th0 - min(mins))
        tol = c * (g.h_min**2 + dt)
        levels.append({"h": g.h_min, "dt": dt, "steps": n, "theta0_min": th0, "theta_min": min(mins),
                       "undershoot": under, "tol": tol})
        times = np.arange(n + 1) * dt
        res.tables[f"level{level}"] = (["time", "theta_min"], [[t, v] for t, v in zip(times, mins)])
        res.check(f"min_principle_level{level}", under <= tol, under, f"<= {c} (h^2 + dt) = {tol:.3e}")
    res.metrics["levels"] = levels
    ratio = levels[1]["tol"] / levels[0]["tol"]
    res.check("tolerance_halves", ratio <= 0.5, ratio, "tol(refined) / tol(base) <= 0.5")


def _sphere_constraint(cfg: SimConfig, res: ScenarioResult, out_dir=None, resume=None):
    thr = cfg["thresholds"]
    laws = cfg.laws()
    st = resume if resume is not None else initial_state(cfg.grid(), cfg["initial"], cfg.seed)
    scheme = _scheme(cfg)
    worst = [0.0]
    mask = st.grid.cell_mask

    def watch(s):
        worst[0] = max(worst[0], float(np.abs(np.sqrt((s.m[:, mask] ** 2).sum(axis=0)) - 1.0).max()))

    dt = None if cfg["time"]["policy"] == "cfl" else float(cfg["time"]["dt"])
    n = int(cfg["time"]["n_steps"])
    final, recs = trajectory(st, laws, n, dt, scheme, int(cfg["time"]["output_every"]), watch,
                             _checkpointer(cfg, out_dir, "sphere_constraint"))
    res.records = recs
    res.metrics.update(n_steps=n, final_time=final.time, llg_update=scheme.llg_update, max_deviation=worst[0],
                       threshold=thr["sphere_constraint_max"])
    res.check("sphere_constraint", worst[0] <= thr["sphere_constraint_max"], worst[0],
              f"<= {thr['sphere_constraint_max']}")


def _decay(cfg: SimConfig, res: ScenarioResult, out_dir=None, resume=None):
    thr = cfg["thresholds"]
    laws = cfg.laws()
    st = resume if resume is not None else initial_state(cfg.grid(), cfg["initial"], cfg.seed)
    scheme = _scheme(cfg)
    dt = _fixed_dt(cfg, st, laws)
    every = int(cfg["time"]["output_every"])
    series = [(st.time, distance_to_constant_equilibria(st))]

    def watch(s):
        if s.step % every == 0:
            series.append((s.time, distance_to_constant_equilibria(s)))

    final, recs = trajectory(st, laws, int(cfg["time"]["n_steps"]), dt, scheme, every, watch,
                             _checkpointer(cfg, out_dir, "decay_to_equilibrium"))
    t, d = np.array(series).T
    rate, r2 = decay_rate_fit(t, d, cfg["params"]["tail_fraction"])
    res.records = recs
    res.tables["distance"] = (["time", "distance"], [[a, b] for a, b in zip(t, d)])
    res.metrics.update(dt=dt, rate=rate, r_squared=r2, initial_distance=d[0], final_distance=d[-1],
                       final_theta_mean=float(final.theta.mean()),
                       final_m_mean=final.m.mean(axis=(1, 2, 3)).tolist())
    res.check("decay_rate_positive", rate > 0, rate, "> 0")
    res.check("decay_fit_quality", r2 >= thr["decay_r2_min"], r2, f">= {thr['decay_r2_min']}")
    res.check("terminal_distance", d[-1] <= thr["decay_terminal_max"], d[-1], f"<= {thr['decay_terminal_max']}")


def _hedgehog(cfg: SimConfig, res: ScenarioResult, out_dir=None, resume=None):
    thr = cfg["thresholds"]
    p = cfg["params"]
    base = dict(cfg["grid"])
    rows = []
    for n in p["resolutions"]:
        g = make_grid({**base, "n": int(n)})
        hh = eq.hedgehog(g)
        w = eq.radial_bump(g, p["bump_center"], p["bump_half_width"])
        l2, linf = eq.weighted_residual_norms(g, hh, w)
        _, l2_all, _ = eq.harmonic_residual(g, hh, "active")
        rows.append([g.h_min, l2, linf, l2_all])
    rows = np.array(rows)
    order = order_fit(rows[:, 0], rows[:, 1])
    res.tables["residual"] = (["h", "weighted_l2", "weighted_max", "unweighted_l2"], rows.tolist())
    res.metrics.update(order_weighted_l2=order, order_weighted_max=order_fit(rows[:, 0], rows[:, 2]),
                       order_unweighted_l2=order_fit(rows[:, 0], rows[:, 3]))
    res.check("hedgehog_residual_order", order >= thr["order_min"], order, f">= {thr['order_min']}")

    # perturbed flow returns to the discrete hedgehog equilibrium
    g = cfg.grid()
    tol = cfg["tolerances"]["harmonic_tol"]
    clean = eq.harmonic_map_solve(g, eq.hedgehog(g), tol=tol, max_iter=p["max_iter"])
    m0 = initial_state(g, cfg["initial"], cfg.seed).m
    noisy = eq.harmonic_map_solve(g, m0, tol=tol, max_iter=p["max_iter"], record_every=10)
    mask = g.cell_mask
    dist = float(np.abs(noisy.m - clean.m)[:, mask].max())
    unit = float(np.abs(np.sqrt((noisy.m[:, mask] ** 2).sum(axis=0)) - 1.0).max())
    res.tables["flow"] = (["iteration", "residual"], [list(x) for x in noisy.history])
    res.metrics.update(flow_iterations=noisy.iterations, flow_residual=noisy.residual,
                       clean_iterations=clean.iterations, distance_to_clean=dist,
                       noise_amplitude=cfg["initial"]["amplitude"])
    res.check("flow_converged", noisy.residual <= tol, noisy.residual, f"<= {tol}")
    res.check("flow_unit_length", unit <= thr["sphere_constraint_max"], unit, f"<= {thr['sphere_constraint_max']}")
    res.check("flow_returns_to_hedgehog", dist <= cfg["initial"]["amplitude"], dist,
              "max |m - m_clean| <= noise amplitude")


def _spectrum(cfg: SimConfig, res: ScenarioResult, out_dir=None, resume=None):
    thr = cfg["thresholds"]
    eig_tol = cfg["tolerances"]["eig_tol"]
    st = initial_state(cfg.grid(), cfg["initial"], cfg.seed)
    rep = eq.normal_stability_check(st, cfg.laws(), eig_tol)
    ev = np.asarray(rep.pop("eigenvalues"))
    order = np.lexsort((ev.imag, ev.real))
    res.tables["eigenvalues"] = (["real", "imag"], [[float(z.real), float(z.imag)] for z in ev[order]])
    res.metrics.update(rep)
    res.metrics["n_unknowns"] = int(ev.size)
    res.check("min_real_part", rep["min_real_part"] >= -eig_tol, rep["min_real_part"], f">= -{eig_tol}")
    res.check("kernel_dimension", rep["kernel_dimension"] == thr["kernel_dimension"], rep["kernel_dimension"],
              f"== {thr['kernel_dimension']}")
    res.check("semisimple_zero", rep["semisimple"], [rep["rank_A0"], rep["rank_A0_squared"]],
              "rank(A0) == rank(A0^2)")
    res.check("kernel_is_equilibrium_tangent", rep["kernel_reconstruction_error"] <= eig_tol,
              rep["kernel_reconstruction_error"], f"<= {eig_tol}")


def _symbol_check(cfg: SimConfig, res: ScenarioResult, out_dir=None, resume=None):
    thr = cfg["thresholds"]
    p = cfg["params"]
    laws = cfg.laws()
    rng = np.random.default_rng(cfg.seed)
    n = int(p["n_samples"])
    lo, hi = p["theta_range"]
    rows = []
    for k in range(n):
        if k % 2 == 0:
            th = rng.uniform(lo, hi)
            alpha, beta = float(laws.alpha(th)), float(laws.beta(th))
        else:
            alpha, beta = rng.uniform(0.05, 5.0), rng.uniform(-5.0, 5.0)
        m = rng.normal(size=3) * rng.uniform(0.2, 2.0)
        out = eq.symbol_spectrum(alpha, beta, m)
        rows.append([alpha, beta, float(np.linalg.norm(m)), out["max_diff"], out["sector_angle"],
                     out["numeric_sector_angle"]])
    rows = np.array(rows)
    max_diff = float(rows[:, 3].max())
    angle_diff = float(np.abs(rows[:, 4] - rows[:, 5]).max())
    expected = np.arctan(np.abs(rows[:, 1]) * rows[:, 2] / rows[:, 0])
    formula_diff = float(np.abs(rows[:, 4] - expected).max())
    res.tables["samples"] = (["alpha", "beta", "m_norm", "max_diff", "sector_angle", "numeric_sector_angle"],
                             rows.tolist())
    res.metrics.update(n_samples=n, max_diff=max_diff, sector_angle_diff=angle_diff, arctan_diff=formula_diff)
    res.check("spectrum_formula", max_diff <= thr["symbol_max_diff"], max_diff, f"<= {thr['symbol_max_diff']}")
    res.check("sector_angle", angle_diff <= thr["symbol_max_diff"] and formula_diff <= 1e-15,
              [angle_diff, formula_diff], f"numeric within {thr['symbol_max_diff']}, arctan formula to 1e-15")


def _manufactured_fields(X, Y, Z):
    A = np.array([
        [np.sin(X + 2 * Y), np.cos(Z), X * Y],
        [np.exp(Y) * Z, np.sin(Z), np.cos(X * Z)],
        [Y**2, np.sin(X * Y), np.cos(Y + Z)],
    ])
    u = np.array([np.cos(2 * Y) * Z, np.sin(X * Z), np.exp(X) * Y])
    return A, u


def _manufactured_m(X, Y, Z):
    a = 0.8 * np.sin(np.pi * X) * np.cos(0.5 * np.pi * Y) + 0.3 * Z
    b = 0.6 * np.cos(np.pi * Z) + 0.2 * X * Y
    return np.array([np.sin(a) * np.cos(b), np.sin(a) * np.sin(b), np.cos(a)])


def _manufactured(cfg: SimConfig, res: ScenarioResult, out_dir=None, resume=None):
    thr = cfg["thresholds"]
    p = cfg["params"]
    laws = cfg.laws()
    lo, hi = p["subdomain"]
    rows = []
    for n in p["resolutions"]:
        g = make_grid({"kind": "box_noslip", "dims": int(n), "length": 1.0})
        X, Y, Z = g.cell_centers()
        sub = (X >= lo) & (X <= hi) & (Y >= lo) & (Y <= hi) & (Z >= lo) & (Z <= hi)
        V = g.cell_volume

        def l2(f):
            f = f.reshape((-1,) + g.dims)
            return float(np.sqrt((f[:, sub] ** 2).sum() * V))

        # MAC gradient of sin(2 pi x) against the exact derivative on interior faces
        f = np.sin(2 * np.pi * X)
        gx = ops.grad_scalar(g, f, "neumann")[0][1:-1]
        xf = g.face_centers(0)[0][1:-1]
        grad_err = float(np.abs(gx - 2 * np.pi * np.cos(2 * np.pi * xf)).max())

        A, u = _manufactured_fields(X, Y, Z)
        ident = l2(ops.divergence_identity_residual(g, A, u))

        m = _manufactured_m(X, Y, Z)
        stress = l2(ops.elastic_stress_div(g, m) - ops.elastic_stress_div_direct(g, m))
        st = zero_state(g)
        st.m = m
        st.theta = 1.0 + 0.3 * X * Y
        llg = l2(ops.llg_rhs(g, st, laws) - ops.llg_rhs_rewritten(g, st, laws))

        st_e = zero_state(g)
        st_e.theta = np.exp(X + Y + Z)
        quad = abs(thermo.total_energy(st_e) - (np.e - 1.0) ** 3)
        rows.append([g.h_min, grad_err, ident, stress, llg, quad])
    rows = np.array(rows)
    names = ["grad_scalar", "divergence_identity", "stress_forms", "llg_forms", "energy_quadrature"]
    res.tables["errors"] = (["h", *names], rows.tolist())
    orders = {nm: order_fit(rows[:, 0], rows[:, k + 1]) for k, nm in enumerate(names)}
    res.metrics["orders"] = orders
    for nm, o in orders.items():
        res.check(f"order_{nm}", o >= thr["order_min"], o, f">= {thr['order_min']}")

    # Legendre identity on a random admissible state
    rng = np.random.default_rng(cfg.seed)
    g = make_grid({"kind": "box_noslip", "dims": 8, "length": 1.0})
    st = zero_state(g)
    st.F = rng.normal(size=st.F.shape)
    st.theta = rng.uniform(0.2, 3.0, g.dims)
    mm = st.m + 0.1 * rng.normal(size=st.m.shape)
    st.m = mm / np.sqrt((mm**2).sum(axis=0))
    leg = float(np.abs(thermo.internal_energy_density(st)
                       - (thermo.free_energy_density(st) + st.theta * thermo.entropy_density(st))).max())
    res.metrics["legendre_max"] = leg
    res.check("legendre_identity", leg <= thr["legendre_max"], leg, f"<= {thr['legendre_max']}")

    # entropy slack calibration: largest per-step entropy decrease relative to dt^2 + dt h^2
    ratios = []
    for n in p["calibration_dims"]:
        g = make_grid({"kind": "box_noslip", "dims": int(n), "length": 1.0})
        st = smooth_state(g, 0.05)
        dt = cfl_dt(st, laws, cfg["time"]["safety"])
        _, recs = trajectory(st, laws, int(p["calibration_steps"]), dt, _scheme(cfg))
        dN = np.diff([r.N for r in recs])
        ratios.append(float(max(0.0, (-dN).max()) / (dt**2 + dt * g.h_min**2)))
    res.metrics["entropy_decrease_over_slack_unit"] = ratios
    res.metrics["entropy_slack_c"] = thr["entropy_slack_c"]
    res.check("entropy_slack_calibration", max(ratios) <= thr["entropy_slack_c"], max(ratios),
              f"<= entropy_slack_c = {thr['entropy_slack_c']}")


_DRIVERS = {
    "consistency": _consistency,
    "max_principle": _max_principle,
    "sphere_constraint": _sphere_constraint,
    "decay_to_equilibrium": _decay,
    "hedgehog": _hedgehog,
    "spectrum": _spectrum,
    "symbol_check": _symbol_check,
    "manufactured_convergence": _manufactured,
}

RESUMABLE = ("consistency", "sphere_constraint", "decay_to_equilibrium")


def run_scenario(cfg: SimConfig, name: str, out_dir=None, resume=None) -> ScenarioResult:
    """Run scenario ``name`` under ``cfg``; write outputs when ``out_dir`` is given.

    ``resume`` is a checkpoint path for the trajectory scenarios; a config-hash
    mismatch only warns.
    """
    if name not in _DRIVERS:
        raise ConfigError(f"unknown scenario {name!r}; known: {', '.join(SCENARIOS)}")
    state = None
    if resume is not None:
        if name not in RESUMABLE:
            raise ConfigError(f"scenario {name!r} cannot resume from a checkpoint")
        state = load_checkpoint(resume, expected_config_hash=cfg.hash())
    if out_dir is not None:
        Path(out_dir).mkdir(parents=True, exist_ok=True)
    res = ScenarioResult(name, config_hash=cfg.hash())
    t0 = time.perf_counter()
    _DRIVERS[name](cfg, res, out_dir, state)
    res.runtime_s = time.perf_counter() - t0
    if out_dir is not None:
        write_outputs(res, out_dir, cfg)
    return res


def write_outputs(res: ScenarioResult, out_dir, cfg: SimConfig | None = None) -> list:
    """CSV diagnostics and tables, JSON summary (with the resolved config) and figures."""
    import csv

    from .plotting import render

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    if res.records:
        p = out / f"{res.scenario}.csv"
        thermo.write_csv(res.records, p)
        paths.append(p)
    for stem, (cols, rows) in res.tables.items():
        p = out / f"{res.scenario}_{stem}.csv"
        with p.open("w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(cols)
            for row in rows:
                wr.writerow([repr(float(v)) for v in row])
        paths.append(p)
    summary = res.summary()
    if cfg is not None:
        summary["config"] = cfg.data
    p = out / f"{res.scenario}_summary.json"
    p.write_text(json.dumps(summary, indent=2, sort_keys=True))
    paths.append(p)
    paths.extend(render(res, out))
    return paths
