"""The nine figure builders and the `render` entry point.

Each builder consumes only the documented study-directory schemas (see
`studydir`) and returns a matplotlib Figure whose panels mirror the
simulator's experiment writeups: trajectory fans for the three shock
experiments, a bifurcation diagram for the flywheel sweep, a phase
diagram for the cannibalization grid, and the three robustness views.

Rendering is deterministic: the Agg backend is forced, all style state
is pinned through a private rc context, and format metadata that would
otherwise embed timestamps (SVG ``Date``, PDF ``CreationDate``) is
stripped, so re-rendering from the same study produces byte-identical
files.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)
import numpy as np  # noqa: E402

from .studydir import (  # noqa: E402
    PlotkitError,
    Study,
    firm_series,
    shock_target,
    shock_times,
)

OUT_FORMATS = ("png", "svg", "pdf")

# Pinned style: nothing here may depend on user-level matplotlibrc.
# svg.hashsalt replaces the per-process uuid salt in SVG element ids,
# which is what makes SVG output reproducible at all.
_RC = {
    "figure.dpi": 100,
    "savefig.dpi": 150,
    "font.family": "DejaVu Sans",
    "font.size": 9.0,
    "axes.titlesize": 10.0,
    "axes.labelsize": 9.0,
    "legend.fontsize": 8.0,
    "lines.linewidth": 1.6,
    "axes.grid": True,
    "grid.alpha": 0.25,
    "grid.linewidth": 0.6,
    "legend.frameon": False,
    "svg.hashsalt": "plotkit",
}

# Timestamp-free metadata per format; the PNG Software key also detaches
# the output from the exact matplotlib patch version string.
_METADATA = {
    "png": {"Software": "plotkit"},
    "svg": {"Date": None},
    "pdf": {"CreationDate": None},
}

_SHOCK_LINE = {"color": "0.35", "linestyle": "--", "linewidth": 1.0}
_GREY = "0.55"


@dataclass(frozen=True)
class FigureSpec:
    """What to draw: which study directory, which figure, which format."""

    study_dir: Path
    figure_id: str
    out_format: str = "png"

    def __post_init__(self):
        object.__setattr__(self, "study_dir", Path(self.study_dir))
        if self.figure_id not in FIGURES:
            raise ValueError(
                f"unknown figure_id {self.figure_id!r}; expected one of "
                f"{', '.join(FIGURES)}")
        if self.out_format not in OUT_FORMATS:
            raise ValueError(
                f"unknown out_format {self.out_format!r}; expected one of "
                f"{', '.join(OUT_FORMATS)}")


def render(spec, out_dir="."):
    """Render one figure from a study directory.

    Writes ``<figure_id>.<out_format>`` into ``out_dir`` (created if
    needed) and returns the written path.  The study directory itself is
    only ever read.
    """
    study = Study(spec.study_dir)
    out = Path(out_dir)
    target = out / f"{spec.figure_id}.{spec.out_format}"
    with plt.rc_context(_RC):
        fig = FIGURES[spec.figure_id].build(study)
        try:
            out.mkdir(parents=True, exist_ok=True)
            fig.savefig(target, format=spec.out_format,
                        metadata=_METADATA[spec.out_format])
        finally:
            plt.close(fig)
    return target


# --------------------------------------------------------------------------
# shared drawing helpers

_FIRM_CMAP = matplotlib.colormaps["tab10"]


def _firm_lines(ax, times, values, shocked=None):
    for i in range(values.shape[1]):
        label = f"firm {i}" + (" (shocked)" if i == shocked else "")
        ax.plot(times, values[:, i], color=_FIRM_CMAP(i % 10), label=label)


def _mark_shocks(ax, times):
    for t in times:
        ax.axvline(t, **_SHOCK_LINE)


def _time_axis(ax):
    ax.set_xlabel("time (years)")


def _cell_edges(centers):
    """Cell boundaries for pcolormesh around (possibly uneven) centers."""
    centers = np.asarray(centers, dtype=float)
    if centers.size == 1:
        half = 0.5 if centers[0] == 0 else 0.5 * abs(centers[0])
        return np.array([centers[0] - half, centers[0] + half])
    mids = 0.5 * (centers[:-1] + centers[1:])
    first = centers[0] - (mids[0] - centers[0])
    last = centers[-1] + (centers[-1] - mids[-1])
    return np.concatenate([[first], mids, [last]])


def _grid_pivot(table, row_col, col_col, value_col):
    """Pivot a long-format sweep table onto its (row, col) grid."""
    rows = table.floats(row_col)
    cols = table.floats(col_col)
    values = table.floats(value_col)
    row_centers = np.unique(rows)
    col_centers = np.unique(cols)
    grid = np.full((row_centers.size, col_centers.size), np.nan)
    r = np.searchsorted(row_centers, rows)
    c = np.searchsorted(col_centers, cols)
    grid[r, c] = values
    if np.isnan(grid).any():
        raise PlotkitError(
            f"{table.path}: sweep grid over ({row_col}, {col_col}) is "
            f"incomplete")
    return row_centers, col_centers, grid


# --------------------------------------------------------------------------
# experiment trajectory panels


def _exp1_panels(study):
    """Five panels for the R&D-shock run: K, share, q, delta, gap."""
    firms = study.run_table(
        "shock", "firms",
        require=("time", "firm", "capability", "share", "shadow_value",
                 "delta_econ", "gap"))
    scenario = study.scenario("shock")
    when = shock_times(scenario)
    shocked = shock_target(scenario)

    times, capability = firm_series(firms, "capability")
    panels = (
        ("A. AI capital stock $K_i$", "capability (log scale)", capability),
        ("B. Market share $s_i$", "share", firm_series(firms, "share")[1]),
        ("C. Shadow price $q_i$", "marginal value of capability",
         firm_series(firms, "shadow_value")[1]),
        ("D. Depreciation rate $\\delta_i$", "per year",
         firm_series(firms, "delta_econ")[1]),
        ("E. Competitive gap $G_i$", "frontier shortfall",
         firm_series(firms, "gap")[1]),
    )

    fig = plt.figure(figsize=(12.0, 6.8), layout="constrained")
    axes = fig.subplots(2, 3).ravel()
    for ax, (title, ylabel, values) in zip(axes, panels):
        _firm_lines(ax, times, values, shocked)
        _mark_shocks(ax, when)
        ax.set_title(title, loc="left")
        ax.set_ylabel(ylabel)
        _time_axis(ax)
    axes[0].set_yscale("log")
    axes[0].legend(loc="upper left")
    axes[5].set_axis_off()
    fig.suptitle("Displacement spiral after an idiosyncratic R&D shock")
    return fig


def _exp2_panels(study):
    """Stagnation decay: relative capability, share, growth, depreciation."""
    stop_firms = study.run_table(
        "stop", "firms",
        require=("time", "firm", "capability", "share", "delta_econ"))
    stop_aggregates = study.run_table(
        "stop", "aggregates", require=("time", "frontier"))
    control_firms = study.run_table(
        "control", "firms", require=("time", "firm", "capability"))
    scenario = study.scenario("stop")
    when = shock_times(scenario)
    shocked = shock_target(scenario)
    g_A = scenario.get("frontier", {}).get("g_A")

    times, capability = firm_series(stop_firms, "capability")
    frontier = stop_aggregates.floats("frontier")
    if frontier.size != times.size:
        raise PlotkitError(
            f"{stop_aggregates.path}: {frontier.size} rows but firms.csv "
            f"has {times.size} steps")
    relative = capability / frontier[:, None]
    _, share = firm_series(stop_firms, "share")
    _, delta = firm_series(stop_firms, "delta_econ")
    control_t, control_k = firm_series(control_firms, "capability")
    growth = np.gradient(np.log(control_k), control_t, axis=0)

    fig = plt.figure(figsize=(10.5, 6.6), layout="constrained")
    axes = fig.subplots(2, 2).ravel()

    _firm_lines(axes[0], times, relative, shocked)
    _mark_shocks(axes[0], when)
    axes[0].set_title("(a) Relative capability $K_i/A(t)$", loc="left")
    axes[0].set_ylabel("capability / frontier")
    axes[0].legend(loc="best")

    _firm_lines(axes[1], times, share, shocked)
    _mark_shocks(axes[1], when)
    axes[1].set_title("(b) Market share $s_i$", loc="left")
    axes[1].set_ylabel("share")

    _firm_lines(axes[2], control_t, growth)
    if g_A is not None:
        reference = axes[2].axhline(
            g_A, color="k", linestyle="--", linewidth=1.2,
            label=f"frontier growth $g_A$ = {g_A:g}")
        axes[2].legend(handles=[reference], loc="best")
    axes[2].set_title("(c) Capability growth, control run", loc="left")
    axes[2].set_ylabel("d ln $K_i$ / dt (per year)")

    _firm_lines(axes[3], times, delta, shocked)
    _mark_shocks(axes[3], when)
    axes[3].set_title("(d) Depreciation rate $\\delta_i$", loc="left")
    axes[3].set_ylabel("per year")

    for ax in axes:
        _time_axis(ax)
    fig.suptitle("Stagnation decay against the balanced growth path")
    return fig


def _exp3_panels(study):
    """Price-cut response: price, tokens, depth, expenditure."""
    columns = ("time", "mean_price", "tokens_served", "depth", "expenditure")
    shock = study.run_table("shock", "aggregates", require=columns)
    control = study.run_table("control", "aggregates", require=columns)
    scenario = study.scenario("shock")
    when = (shock_times(scenario, kind="price_override_factor")
            or shock_times(scenario))
    elasticity = study.headline().get("arc_elasticity")

    t_shock = shock.floats("time")
    t_control = control.floats("time")
    panels = (
        ("(a) Mean token price", "price"),
        ("(b) Total tokens served", "tokens / year"),
        ("(c) Mean architecture depth $d^*$", "depth"),
        ("(d) Token expenditure $p \\cdot Q$", "spend / year"),
    )
    columns_drawn = ("mean_price", "tokens_served", "depth", "expenditure")

    fig = plt.figure(figsize=(10.5, 6.4), layout="constrained")
    axes = fig.subplots(2, 2).ravel()
    for ax, (title, ylabel), name in zip(axes, panels, columns_drawn):
        ax.plot(t_control, control.floats(name), color=_GREY,
                linestyle="--", label="control")
        ax.plot(t_shock, shock.floats(name), color="tab:blue",
                label="price-cut run")
        _mark_shocks(ax, when)
        ax.set_title(title, loc="left")
        ax.set_ylabel(ylabel)
        _time_axis(ax)
    axes[0].legend(loc="best")
    if elasticity is not None and np.isfinite(elasticity):
        axes[3].annotate(f"arc elasticity = {elasticity:+.2f}",
                         xy=(0.04, 0.92), xycoords="axes fraction",
                         fontsize=9, va="top")
    fig.suptitle("Demand response to a 50% token price cut")
    return fig


# --------------------------------------------------------------------------
# bifurcation and phase diagrams


def _exp4_bifurcation(study):
    """Final concentration across the flywheel-intensity sweep."""
    table = study.table(
        "bifurcation", require=("eta_over_mu", "hhi_final", "above_threshold"))
    headline = study.headline()
    n_firms = study.base_config().get("upstream", {}).get("N")

    order = np.argsort(table.floats("eta_over_mu"))
    omega = table.floats("eta_over_mu")[order]
    hhi = table.floats("hhi_final")[order]
    above = table.ints("above_threshold")[order].astype(bool)

    fig = plt.figure(figsize=(7.2, 4.8), layout="constrained")
    ax = fig.subplots()
    ax.plot(omega, hhi, color="0.7", linewidth=1.0, zorder=1)
    ax.scatter(omega[~above], hhi[~above], color="tab:blue", s=26, zorder=2,
               label="stable oligopoly")
    ax.scatter(omega[above], hhi[above], color="tab:red", s=26, zorder=2,
               label="runaway concentration")

    threshold = headline.get("threshold")
    if threshold is not None and np.isfinite(threshold):
        ax.axvline(threshold, color="k", linewidth=1.4,
                   label=f"detected threshold $\\Omega^*$ = {threshold:.2f}")
    closed_form = headline.get("closed_form_threshold")
    if closed_form is not None and np.isfinite(closed_form):
        ax.axvline(closed_form, color="0.3", linestyle=":", linewidth=1.4,
                   label=f"closed-form threshold = {closed_form:.2f}")
    if n_firms:
        ax.axhline(1.0 / n_firms, color=_GREY, linestyle="--", linewidth=1.0,
                   label=f"symmetric benchmark 1/{n_firms}")

    ax.set_xlabel("flywheel intensity $\\eta/\\mu_D$")
    ax.set_ylabel("final HHI")
    ax.set_title("Bifurcation of long-run market concentration")
    ax.legend(loc="center left")
    return fig


def _exp5_phase(study):
    """Ecosystem health and survival over the growth x cannibalization grid."""
    table = study.table(
        "phase", require=("g_A", "xi_cann", "health_t15", "output_t15",
                          "alive_t15"))
    xi, g_A, health = _grid_pivot(table, "xi_cann", "g_A", "health_t15")
    _, _, alive = _grid_pivot(table, "xi_cann", "g_A", "alive_t15")
    g_edges = _cell_edges(g_A)
    xi_edges = _cell_edges(xi)
    # the survival-with-degradation contrast needs the same boundary on
    # both panels; only draw it when the health surface crosses it
    boundary = health.min() < 0.5 < health.max()

    fig = plt.figure(figsize=(11.0, 4.6), layout="constrained")
    axes = fig.subplots(1, 2)

    mesh = axes[0].pcolormesh(g_edges, xi_edges, health, cmap="viridis",
                              vmin=0.0)
    fig.colorbar(mesh, ax=axes[0], label="ecosystem health at year 15")
    if boundary:
        contour = axes[0].contour(g_A, xi, health, levels=[0.5], colors="w",
                                  linestyles="--", linewidths=1.4)
        axes[0].clabel(contour, fmt={0.5: "health = 0.5"}, fontsize=8)
    axes[0].set_title("(a) Phase diagram: downstream capital health",
                      loc="left")

    mesh = axes[1].pcolormesh(g_edges, xi_edges, alive, cmap="magma")
    fig.colorbar(mesh, ax=axes[1], label="agents alive at year 15")
    if boundary:
        axes[1].contour(g_A, xi, health, levels=[0.5], colors="tab:red",
                        linestyles="--", linewidths=1.4)
    axes[1].set_title("(b) Survival against the degradation boundary",
                      loc="left")

    for ax in axes:
        ax.set_xlabel("frontier growth $g_A$")
        ax.set_ylabel("cannibalization exposure $\\xi$")
        ax.grid(False)
    fig.suptitle("Upstream progress vs downstream value capture")
    return fig


# --------------------------------------------------------------------------
# robustness views


def _mc_robustness(study):
    """Jittered-parameter draws and the final-HHI distribution."""
    metrics = study.metrics(
        require=("failed", "hhi_final", "delta1_draw", "delta2_draw",
                 "eta_over_mu_draw", "theta_draw"))
    ok = metrics.ints("failed") == 0
    hhi = metrics.floats("hhi_final")[ok]
    draws = {name: metrics.floats(f"{name}_draw")[ok]
             for name in ("delta1", "delta2", "eta_over_mu", "theta")}
    hist = study.table("hhi_hist", require=("bin_left", "bin_right", "count"))
    median = study.headline().get("median_hhi")

    fig = plt.figure(figsize=(12.0, 6.8), layout="constrained")
    axes = fig.subplots(2, 3).ravel()

    draw_panels = (
        ("(a) $\\delta_1$ draws", "delta1", "$\\delta_1$"),
        ("(b) $\\delta_2$ draws", "delta2", "$\\delta_2$"),
        ("(c) $\\theta$ draws", "theta", "$\\theta$"),
    )
    for ax, (title, name, xlabel) in zip(axes, draw_panels):
        ax.hist(draws[name], bins=15, color="0.6")
        ax.set_title(title, loc="left")
        ax.set_xlabel(xlabel)
        ax.set_ylabel("runs")

    left = hist.floats("bin_left")
    width = hist.floats("bin_right") - left
    axes[3].bar(left, hist.floats("count"), width=width, align="edge",
                color="tab:blue", edgecolor="white", linewidth=0.5)
    if median is not None and np.isfinite(median):
        axes[3].axvline(median, color="k", linewidth=1.4,
                        label=f"median = {median:.2f}")
        axes[3].legend(loc="upper right")
    axes[3].set_title("(d) Final HHI distribution", loc="left")
    axes[3].set_xlabel("final HHI")
    axes[3].set_ylabel("runs")

    scatter_panels = (
        ("(e) HHI vs flywheel draw", "eta_over_mu", "$\\eta/\\mu_D$ draw"),
        ("(f) HHI vs $\\delta_2$ draw", "delta2", "$\\delta_2$ draw"),
    )
    for ax, (title, name, xlabel) in zip(axes[4:], scatter_panels):
        ax.scatter(draws[name], hhi, s=7, alpha=0.45, color="tab:blue",
                   edgecolors="none")
        ax.set_title(title, loc="left")
        ax.set_xlabel(xlabel)
        ax.set_ylabel("final HHI")

    fig.suptitle("Concentration under parameter jitter")
    return fig


def _nsweep(study):
    """Concentration by initial firm count against the 1/N benchmark."""
    table = study.table(
        "concentration", require=("n_firms", "hhi_final", "one_over_n"))
    counts = table.ints("n_firms")
    final = table.floats("hhi_final")
    uniform = table.floats("one_over_n")

    fig = plt.figure(figsize=(10.5, 4.4), layout="constrained")
    axes = fig.subplots(1, 2)

    for k, n in enumerate(counts):
        aggregates = study.run_table(f"N={n}", "aggregates",
                                     require=("time", "hhi"))
        axes[0].plot(aggregates.floats("time"), aggregates.floats("hhi"),
                     color=_FIRM_CMAP(k % 10), label=f"N = {n}")
    axes[0].set_title("(a) Concentration dynamics by firm count", loc="left")
    axes[0].set_ylabel("HHI")
    axes[0].legend(loc="best")
    _time_axis(axes[0])

    x = np.arange(counts.size)
    axes[1].bar(x - 0.19, final, width=0.38, color="tab:blue",
                label="simulated final HHI")
    axes[1].bar(x + 0.19, uniform, width=0.38, color="0.65",
                label="symmetric benchmark 1/N")
    axes[1].set_xticks(x, [f"N = {n}" for n in counts])
    axes[1].set_title("(b) Final HHI vs the symmetric benchmark", loc="left")
    axes[1].set_ylabel("HHI")
    axes[1].legend(loc="best")

    fig.suptitle("Concentration is not an artifact of the firm count")
    return fig


_STRESS_STYLE = {
    "control": {"color": "0.4", "linestyle": "--"},
    "frontier_jump": {"color": "tab:orange"},
    "demand_dip": {"color": "tab:blue"},
}


def _stress(study):
    """Shock response and time to rejoin the control path."""
    arms = ("control", "frontier_jump", "demand_dip")
    aggregates = {
        arm: study.run_table(arm, "aggregates",
                             require=("time", "hhi", "tokens_served"))
        for arm in arms
    }
    recovery = study.table(
        "recovery", require=("label", "recovery_time", "recovered"))
    when = shock_times(study.scenario("frontier_jump"))

    fig = plt.figure(figsize=(12.0, 4.2), layout="constrained")
    axes = fig.subplots(1, 3)

    for column, ax, title, ylabel in (
            ("hhi", axes[0], "(a) Concentration response", "HHI"),
            ("tokens_served", axes[1], "(b) Tokens served", "tokens / year")):
        for arm in arms:
            table = aggregates[arm]
            ax.plot(table.floats("time"), table.floats(column),
                    label=arm, **_STRESS_STYLE[arm])
        _mark_shocks(ax, when)
        ax.set_title(title, loc="left")
        ax.set_ylabel(ylabel)
        _time_axis(ax)
    axes[0].legend(loc="best")

    labels = recovery.strings("label")
    times = recovery.floats("recovery_time")
    recovered = recovery.ints("recovered").astype(bool)
    x = np.arange(len(labels))
    heights = np.where(np.isfinite(times), times, 0.0)
    axes[2].bar(x, heights, width=0.55, color="tab:blue")
    top = max(0.5, float(np.nanmax(heights)) * 1.3 if heights.size else 0.5)
    axes[2].set_ylim(0.0, top)
    for k, (t, ok) in enumerate(zip(times, recovered)):
        note = f"{t:.2f} yr" if ok and np.isfinite(t) else "not recovered"
        axes[2].annotate(note, xy=(k, heights[k]), xytext=(0, 4),
                         textcoords="offset points", ha="center", fontsize=8)
    axes[2].set_xticks(x, labels)
    axes[2].set_title("(c) Time to rejoin the control path", loc="left")
    axes[2].set_ylabel("years after shock")

    fig.suptitle("Stability of the growth path under late shocks")
    return fig


_ABLATION_STYLE = {
    "full": {"color": "tab:red", "label": "full model"},
    "no_red_queen": {"color": "tab:blue",
                     "label": "no gap depreciation ($\\delta_2 = 0$)"},
    "no_flywheel": {"color": "tab:green",
                    "label": "no data flywheel ($\\eta = 0$)"},
}

_ABLATION_TICKS = {"full": "full", "no_red_queen": "$\\delta_2 = 0$",
                   "no_flywheel": "$\\eta = 0$"}


def _ablation(study):
    """Mechanism knockouts: HHI paths and final concentration by arm."""
    table = study.table("ablation", require=("label", "hhi_final"))
    uniform = study.headline().get("uniform_hhi")
    labels = table.strings("label")
    final = table.floats("hhi_final")

    fig = plt.figure(figsize=(10.5, 4.4), layout="constrained")
    axes = fig.subplots(1, 2)

    for label in labels:
        aggregates = study.run_table(label, "aggregates",
                                     require=("time", "hhi"))
        style = _ABLATION_STYLE.get(label, {"label": label})
        axes[0].plot(aggregates.floats("time"), aggregates.floats("hhi"),
                     **style)
    if uniform is not None and np.isfinite(uniform):
        axes[0].axhline(uniform, color=_GREY, linestyle="--", linewidth=1.0,
                        label="symmetric 1/N")
    axes[0].set_title("(a) Concentration under mechanism knockouts",
                      loc="left")
    axes[0].set_ylabel("HHI")
    axes[0].legend(loc="best")
    _time_axis(axes[0])

    x = np.arange(len(labels))
    colors = [_ABLATION_STYLE.get(label, {}).get("color", "0.5")
              for label in labels]
    axes[1].bar(x, final, width=0.55, color=colors)
    if uniform is not None and np.isfinite(uniform):
        axes[1].axhline(uniform, color=_GREY, linestyle="--", linewidth=1.0)
    axes[1].set_xticks(x, [_ABLATION_TICKS.get(label, label)
                           for label in labels])
    axes[1].set_title("(b) Final concentration by arm", loc="left")
    axes[1].set_ylabel("final HHI")

    fig.suptitle("Both depreciation channels are needed for monopoly")
    return fig


# --------------------------------------------------------------------------
# registry


@dataclass(frozen=True)
class _Figure:
    description: str
    build: object


FIGURES = {
    "exp1_panels": _Figure(
        "five panels for the R&D-shock run: capital, share, shadow price, "
        "depreciation, gap", _exp1_panels),
    "exp2_panels": _Figure(
        "stagnation decay: relative capability, share, growth vs the "
        "balanced path, depreciation", _exp2_panels),
    "exp3_panels": _Figure(
        "price-cut response: price, token consumption, architecture depth, "
        "expenditure", _exp3_panels),
    "exp4_bifurcation": _Figure(
        "final HHI across the flywheel sweep with the detected threshold",
        _exp4_bifurcation),
    "exp5_phase": _Figure(
        "ecosystem health and survival over the growth x cannibalization "
        "grid", _exp5_phase),
    "mc_robustness": _Figure(
        "jittered-parameter draws and the final-HHI distribution",
        _mc_robustness),
    "nsweep": _Figure(
        "concentration by initial firm count against the 1/N benchmark",
        _nsweep),
    "stress": _Figure(
        "late-shock response and recovery times against the control path",
        _stress),
    "ablation": _Figure(
        "mechanism knockouts: HHI paths and final concentration by arm",
        _ablation),
}
