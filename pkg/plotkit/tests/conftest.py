"""Synthetic study directories for the renderer tests.

plotkit's contract is the simulator's *file* layout, not its Python
API, so these fixtures fabricate small studies by writing the
documented CSV/JSON schemas directly.  The series are smooth made-up
curves; only the shapes, column names, and file names matter.
"""

import json

import numpy as np
import pytest

FIRM_COLUMNS = (
    "step", "time", "firm", "capability", "data", "price", "share",
    "quantity", "revenue", "investment", "production", "gap",
    "delta_econ", "delta_stock", "shadow_value", "innovation_tax",
)

AGGREGATE_COLUMNS = (
    "step", "time", "frontier", "token_demand", "tokens_served",
    "expenditure", "mean_price", "hhi", "solver_iterations",
    "solver_residual", "depth", "agents_alive", "downstream_output",
    "downstream_profit", "mean_orchestration",
)

METRIC_COLUMNS = (
    "run_index", "label", "replication", "seed", "failed",
    "failure_message", "hhi_final", "share_max_final", "mean_price_final",
    "tokens_served_final", "expenditure_final", "depth_final",
    "agents_alive_final", "downstream_output_final",
)


def _cell(value):
    if isinstance(value, str):
        return value
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def write_csv(path, header, rows):
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_cell(v) for v in row))
    path.write_text("\n".join(lines) + "\n")


def write_json(path, payload):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=1, sort_keys=True) + "\n")


def write_run(run_dir, times, firm_cols=None, agg_cols=None, scenario=None):
    """One run directory: firms.csv / aggregates.csv / scenario.json.

    ``firm_cols`` maps column name -> (n_steps, n_firms) array and
    ``agg_cols`` maps column name -> (n_steps,) array; every other
    documented column is filled with zeros.
    """
    if firm_cols is not None:
        n_firms = next(iter(firm_cols.values())).shape[1]
        rows = []
        for k, t in enumerate(times):
            for i in range(n_firms):
                row = [k, float(t), i]
                for name in FIRM_COLUMNS[3:]:
                    values = firm_cols.get(name)
                    row.append(float(values[k, i]) if values is not None
                               else 0.0)
                rows.append(row)
        write_csv(run_dir / "firms.csv", FIRM_COLUMNS, rows)
    if agg_cols is not None:
        rows = []
        for k, t in enumerate(times):
            row = [k, float(t)]
            for name in AGGREGATE_COLUMNS[2:]:
                values = agg_cols.get(name)
                row.append(float(values[k]) if values is not None else 0.0)
            rows.append(row)
        write_csv(run_dir / "aggregates.csv", AGGREGATE_COLUMNS, rows)
    write_json(run_dir / "scenario.json", scenario if scenario is not None
               else {"shocks": []})


def write_summary(root, name, headline=None):
    write_json(root / "summary.json", {
        "schema_version": "aimarketsim.study/1",
        "study": name,
        "headline": headline or {},
    })


# --------------------------------------------------------------------------
# one builder per figure id


def make_exp1(root):
    times = np.linspace(0.0, 12.0, 25)
    boost = np.exp(0.5 * np.clip(times - 5.0, 0.0, None))
    capability = np.stack(
        [10.0 * 0.92 ** i * np.exp(0.25 * times) for i in range(4)], axis=1)
    capability[:, 0] *= boost
    share = capability ** 2 / (capability ** 2).sum(axis=1, keepdims=True)
    gap = 1.0 - capability / capability.max(axis=1, keepdims=True)
    write_run(root / "runs" / "shock", times,
              firm_cols={
                  "capability": capability,
                  "share": share,
                  "gap": gap,
                  "delta_econ": 0.1 + 1.5 * gap,
                  "shadow_value": 2.5 * share * (1.0 - share) / capability,
              },
              scenario={"shocks": [{"kind": "rd_boost", "time": 5.0,
                                    "magnitude": 0.5, "target": 0}]})
    write_summary(root, "exp1")
    return root


def make_exp2(root):
    times = np.linspace(0.0, 12.0, 25)
    frontier = 12.0 * np.exp(0.1 * times)
    stalled = np.stack(
        [10.0 * 0.95 ** i * np.exp(0.1 * times) for i in range(4)], axis=1)
    stalled[:, 0] = 10.0 * np.exp(0.1 * np.minimum(times, 5.0))
    share = stalled ** 2 / (stalled ** 2).sum(axis=1, keepdims=True)
    delta = np.full_like(stalled, 0.1)
    delta[:, 0] = np.where(times > 5.0, 0.23, 0.1)
    scenario = {"frontier": {"A0": 12.0, "g_A": 0.1},
                "shocks": [{"kind": "rd_stop", "time": 5.0, "target": 0}]}
    write_run(root / "runs" / "stop", times,
              firm_cols={"capability": stalled, "share": share,
                         "delta_econ": delta},
              agg_cols={"frontier": frontier},
              scenario=scenario)
    steady = np.stack(
        [9.0 * 0.97 ** i * np.exp(0.1 * times) for i in range(4)], axis=1)
    write_run(root / "runs" / "control", times,
              firm_cols={"capability": steady},
              scenario={"frontier": {"A0": 12.0, "g_A": 0.1}, "shocks": []})
    write_summary(root, "exp2")
    return root


def make_exp3(root):
    times = np.linspace(0.0, 10.0, 21)
    cut = times >= 5.0
    control_price = np.full(times.size, 2.0)
    shock_price = np.where(cut, 1.0, 2.0)
    control_tokens = np.exp(0.03 * times)
    shock_tokens = control_tokens * np.where(cut, 2.6, 1.0)
    for label, price, tokens, depth in (
            ("control", control_price, control_tokens,
             np.full(times.size, 0.12)),
            ("shock", shock_price, shock_tokens,
             np.where(cut, 0.5, 0.12))):
        scenario = {"shocks": []} if label == "control" else {
            "shocks": [{"kind": "price_override_factor", "time": 5.0,
                        "magnitude": 0.5}]}
        write_run(root / "runs" / label, times,
                  agg_cols={"mean_price": price, "tokens_served": tokens,
                            "depth": depth, "expenditure": price * tokens},
                  scenario=scenario)
    write_summary(root, "exp3", {"arc_elasticity": -1.33,
                                 "expenditure_ratio": 1.25,
                                 "depth_ratio": 4.2})
    return root


def make_exp4(root):
    omega = np.linspace(0.5, 2.5, 21)
    hhi = 0.25 + 0.73 / (1.0 + np.exp(-14.0 * (omega - 1.4)))
    rows = [(float(w), float(h), int(w > 1.4))
            for w, h in zip(omega, hhi)]
    write_csv(root / "bifurcation.csv",
              ["eta_over_mu", "hhi_final", "above_threshold"], rows)
    write_json(root / "config.json", {"base": {"upstream": {"N": 4}}})
    write_summary(root, "exp4", {"detected": True, "threshold": 1.4,
                                 "closed_form_threshold": 1.48,
                                 "hhi_jump": 0.6})
    return root


def make_exp5(root):
    rows = []
    for g in (0.0, 0.1, 0.2):
        for x in (0.0, 0.4, 0.8):
            health = 1.4 * np.exp(-9.0 * g * x)
            rows.append((g, x, health, 10.0 * (1.0 + 2.0 * g) * (1.0 - 0.5 * x),
                         50.0 - 25.0 * g * x))
    write_csv(root / "phase.csv",
              ["g_A", "xi_cann", "health_t15", "output_t15", "alive_t15"],
              rows)
    write_summary(root, "exp5", {"trap_health_t15": 0.33,
                                 "benign_health_t15": 1.4})
    return root


def make_mc(root):
    rng = np.random.default_rng(7)
    n_runs = 80
    draws = {
        "delta1": 1.5 * rng.uniform(0.8, 1.2, n_runs),
        "delta2": 1.0 * rng.uniform(0.8, 1.2, n_runs),
        "eta_over_mu": 1.0 * rng.uniform(0.8, 1.2, n_runs),
        "theta": 2.5 * rng.uniform(0.8, 1.2, n_runs),
    }
    hhi = np.clip(rng.normal(0.33, 0.06, n_runs), 0.21, 0.95)
    header = list(METRIC_COLUMNS) + [f"{k}_draw" for k in draws]
    rows = []
    for k in range(n_runs):
        failed = k == 5  # one failed run: metric cells stay empty
        metric_cells = [""] * 8 if failed else [
            hhi[k], 0.9, 1.8, 4.0, 7.0, 0.1, 50, 12.0]
        rows.append([k, "draw", k, 1000 + k, int(failed),
                     "solver diverged" if failed else ""]
                    + metric_cells + [draws[name][k] for name in draws])
    write_csv(root / "metrics.csv", header, rows)
    ok = np.arange(n_runs) != 5
    counts, edges = np.histogram(hhi[ok], bins=20, range=(0.2, 1.0))
    write_csv(root / "hhi_hist.csv", ["bin_left", "bin_right", "count"],
              [(edges[i], edges[i + 1], int(c)) for i, c in enumerate(counts)])
    write_summary(root, "mc", {"median_hhi": float(np.median(hhi[ok])),
                               "n_completed": int(ok.sum())})
    return root


def make_nsweep(root):
    times = np.linspace(0.0, 20.0, 21)
    finals = {2: 0.97, 4: 0.31, 8: 0.19, 16: 0.12}
    rows = []
    for n, final in finals.items():
        start = 1.0 / n
        hhi = start + (final - start) * (times / times[-1]) ** 2
        write_run(root / "runs" / f"N={n}", times, agg_cols={"hhi": hhi})
        rows.append((n, final, start, final * n))
    write_csv(root / "concentration.csv",
              ["n_firms", "hhi_final", "one_over_n", "ratio"], rows)
    write_summary(root, "nsweep")
    return root


def make_stress(root):
    times = np.linspace(0.0, 20.0, 41)
    post = times >= 15.0
    hhi = np.full(times.size, 0.25)
    tokens = 5.0 * np.exp(0.02 * times)
    write_run(root / "runs" / "control", times,
              agg_cols={"hhi": hhi, "tokens_served": tokens})
    write_run(root / "runs" / "frontier_jump", times,
              agg_cols={"hhi": hhi + 0.002 * post * np.exp(-(times - 15.0)),
                        "tokens_served": tokens * (1.0 + 0.1 * post)},
              scenario={"shocks": [{"kind": "frontier_jump_factor",
                                    "time": 15.0, "magnitude": 1.3}]})
    write_run(root / "runs" / "demand_dip", times,
              agg_cols={"hhi": hhi,
                        "tokens_served": tokens * np.where(post, 0.5, 1.0)},
              scenario={"shocks": [{"kind": "demand_scale_factor",
                                    "time": 15.0, "magnitude": 0.5}]})
    write_csv(root / "recovery.csv", ["label", "recovery_time", "recovered"],
              [("frontier_jump", 0.0, 1), ("demand_dip", float("nan"), 0)])
    write_summary(root, "stress")
    return root


def make_ablation(root):
    times = np.linspace(0.0, 20.0, 21)
    ramp = (times / times[-1]) ** 2
    paths = {
        "full": 0.25 + 0.72 * ramp,
        "no_red_queen": 0.25 + 0.03 * ramp,
        "no_flywheel": 0.25 + 0.30 * ramp,
    }
    rows = []
    for label, hhi in paths.items():
        write_run(root / "runs" / label, times, agg_cols={"hhi": hhi})
        rows.append((label, float(hhi[-1]), float(paths["full"][-1] - hhi[-1])))
    write_csv(root / "ablation.csv",
              ["label", "hhi_final", "delta_vs_full"], rows)
    write_summary(root, "ablation", {"hhi_full": float(paths["full"][-1]),
                                     "uniform_hhi": 0.25})
    return root


MAKERS = {
    "exp1_panels": make_exp1,
    "exp2_panels": make_exp2,
    "exp3_panels": make_exp3,
    "exp4_bifurcation": make_exp4,
    "exp5_phase": make_exp5,
    "mc_robustness": make_mc,
    "nsweep": make_nsweep,
    "stress": make_stress,
    "ablation": make_ablation,
}


@pytest.fixture(scope="session")
def studies(tmp_path_factory):
    """figure_id -> synthetic study directory able to back that figure."""
    root = tmp_path_factory.mktemp("studies")
    return {figure_id: make(root / figure_id)
            for figure_id, make in MAKERS.items()}
