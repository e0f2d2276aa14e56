"""Figures for scenario results, rendered off-screen to PNG files."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "figure.dpi": 110,
    "font.size": 9,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "lines.linewidth": 1.4,
    "legend.frameon": False,
}


def _table(res, stem):
    cols, rows = res.tables[stem]
    arr = np.asarray(rows, dtype=float).reshape(-1, len(cols))
    return {c: arr[:, k] for k, c in enumerate(cols)}


def _records(records):
    from .thermo import CSV_COLUMNS

    arr = np.array([r.row() for r in records], dtype=float)
    return {c: arr[:, k] for k, c in enumerate(CSV_COLUMNS)}


def _consistency(res, fig):
    a = _records(res.records)
    b = _table(res, "half_dt")
    ax1, ax2, ax3 = fig.subplots(1, 3)
    for d, lab in ((a, "dt"), (b, "dt/2")):
        ax1.plot(d["time"], (d["E"] - d["E"][0]) / abs(d["E"][0]), label=lab)
    ax1.set(xlabel="t", ylabel="relative energy drift")
    ax1.legend()
    ax2.plot(a["time"], a["N"] - a["N"][0])
    ax2.set(xlabel="t", ylabel="N(t) - N(0)")
    t = a["time"]
    ax3.plot(0.5 * (t[1:] + t[:-1]), np.diff(a["N"]) / np.diff(t), label="dN/dt")
    ax3.plot(t, a["r_integral"], "--", label="integral of r")
    ax3.set(xlabel="t", ylabel="entropy rate")
    ax3.legend()


def _max_principle(res, fig):
    ax = fig.subplots()
    for k, lev in enumerate(res.metrics["levels"]):
        d = _table(res, f"level{k}")
        line, = ax.plot(d["time"], d["theta_min"] - lev["theta0_min"], label=f"h = {lev['h']:.4g}")
        ax.axhline(-lev["tol"], color=line.get_color(), ls=":", lw=1)
    ax.set(xlabel="t", ylabel="min theta(t) - min theta(0)")
    ax.legend()


def _sphere(res, fig):
    a = _records(res.records)
    ax = fig.subplots()
    ax.semilogy(a["time"], np.maximum(a["m_constraint_max"], 1e-18))
    if "threshold" in res.metrics:
        ax.axhline(res.metrics["threshold"], color="k", ls=":", lw=1, label="threshold")
        ax.legend()
    ax.set(xlabel="t", ylabel="max | |m| - 1 |")


def _decay(res, fig):
    d = _table(res, "distance")
    ax = fig.subplots()
    ax.semilogy(d["time"], d["distance"], label="distance to constant equilibria")
    rate = res.metrics["rate"]
    t = d["time"]
    ax.semilogy(t, d["distance"][-1] * np.exp(-rate * (t - t[-1])), "--", label=f"fit, rate {rate:.3g}")
    ax.set(xlabel="t", ylabel="distance")
    ax.legend()


def _hedgehog(res, fig):
    d = _table(res, "residual")
    f = _table(res, "flow")
    ax1, ax2 = fig.subplots(1, 2)
    ax1.loglog(d["h"], d["weighted_l2"], "o-", label="weighted L2")
    ax1.loglog(d["h"], d["weighted_max"], "s-", label="weighted max")
    ax1.loglog(d["h"], d["weighted_l2"][0] * (d["h"] / d["h"][0]) ** 2, "k:", label="slope 2")
    ax1.set(xlabel="h", ylabel="hedgehog residual")
    ax1.legend()
    ax2.semilogy(f["iteration"], f["residual"])
    ax2.set(xlabel="flow iteration", ylabel="residual L2 norm")


def _spectrum(res, fig):
    d = _table(res, "eigenvalues")
    ax = fig.subplots()
    ax.plot(d["real"], d["imag"], ".", ms=3)
    ax.axvline(0.0, color="k", lw=0.8)
    ax.set_xscale("symlog", linthresh=1e-6)
    ax.set(xlabel="Re lambda", ylabel="Im lambda")


def _symbol(res, fig):
    d = _table(res, "samples")
    ax1, ax2 = fig.subplots(1, 2)
    ax1.hist(np.log10(np.maximum(d["max_diff"], 1e-18)), bins=30)
    ax1.set(xlabel="log10 max eigenvalue difference", ylabel="samples")
    ax2.plot(d["sector_angle"], d["numeric_sector_angle"], ".", ms=3)
    ax2.plot([0, np.pi / 2], [0, np.pi / 2], "k:", lw=1)
    ax2.set(xlabel="sector angle (formula)", ylabel="sector angle (eigensolve)")


def _manufactured(res, fig):
    d = _table(res, "errors")
    ax = fig.subplots()
    h = d.pop("h")
    for name, err in d.items():
        ax.loglog(h, np.maximum(err, 1e-18), "o-", label=name.replace("_", " "))
    ax.loglog(h, d["grad_scalar"][0] * (h / h[0]) ** 2, "k:", label="slope 2")
    ax.set(xlabel="h", ylabel="error")
    ax.legend(fontsize=7)


_PLOTS = {
    "consistency": (_consistency, (11, 3.4)),
    "max_principle": (_max_principle, (5, 3.6)),
    "sphere_constraint": (_sphere, (5, 3.6)),
    "decay_to_equilibrium": (_decay, (5, 3.6)),
    "hedgehog": (_hedgehog, (9, 3.6)),
    "spectrum": (_spectrum, (5, 3.6)),
    "symbol_check": (_symbol, (9, 3.6)),
    "manufactured_convergence": (_manufactured, (5.5, 4)),
}


def render(res, out_dir) -> list:
    """Write ``<scenario>.png`` for a scenario result; returns the written paths."""
    if res.scenario not in _PLOTS:
        return []
    fn, size = _PLOTS[res.scenario]
    path = Path(out_dir) / f"{res.scenario}.png"
    with plt.rc_context(STYLE):
        fig = plt.figure(figsize=size, layout="constrained")
        try:
            fn(res, fig)
            fig.suptitle(f"{res.scenario}: {'pass' if res.passed else 'FAIL'}")
            fig.savefig(path)
        finally:
            plt.close(fig)
    return [path]
