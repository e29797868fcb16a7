"""Command-line front door: run scenarios, studies, and analyses.

Commands
--------
``run``       one scenario -> trace CSVs + summary JSON
``study``     a named preset batch -> study directory with metrics tables
``analyze``   a written run directory -> one metric table, printed + saved
``validate``  parse and validate a scenario file without running it

Output roots default under ``$AIMARKETSIM_OUT_ROOT`` (``./out`` if unset).
Existing non-empty output directories are never overwritten silently;
pass ``--overwrite``.

Exit codes: 0 success, 1 usage or validation error, 2 numerical failure,
3 study finished with some runs failed.
"""

from __future__ import annotations

import json
import os
import shutil
import sys
from dataclasses import dataclass, field
from pathlib import Path

import click
import numpy as np

from . import analysis
from .config import ConfigError, ScenarioConfig, load_scenario, with_overrides
from .engine import NumericalError, Simulation
from .harness import PRESETS, StudyError, list_presets, run_preset

EXIT_OK = 0
EXIT_USAGE = 1          # bad input: missing files, invalid scenarios, schema
EXIT_NUMERICAL = 2      # the engine diverged / solver failed
EXIT_PARTIAL = 3        # study completed but some runs failed

OUT_ROOT_ENV = "AIMARKETSIM_OUT_ROOT"

ANALYZE_METRICS = ("hhi", "elasticity", "cv", "health", "stability")


@dataclass
class CommandResult:
    """What one CLI command produced: exit code, artifacts, log text."""

    exit_code: int
    artifacts: list = field(default_factory=list)
    log: str = ""


def _out_root():
    return Path(os.environ.get(OUT_ROOT_ENV, "out"))


def _prepare_out(path, overwrite):
    """Create ``path``, refusing to clobber a non-empty directory."""
    out = Path(path)
    if out.exists() and any(out.iterdir()):
        if not overwrite:
            raise FileExistsError(
                f"output directory {out} exists and is not empty; "
                f"pass --overwrite to replace it")
        shutil.rmtree(out)
    out.mkdir(parents=True, exist_ok=True)
    return out


# ----------------------------------------------------------------------
# command bodies (plain functions so tests can call them directly)


def cmd_run(scenario_path, out_dir=None, seed=None, overwrite=False):
    try:
        config = load_scenario(scenario_path)
        if seed is not None:
            config = with_overrides(config, {"sim.seed": int(seed)})
    except ConfigError as exc:
        return CommandResult(EXIT_USAGE, log=f"invalid scenario: {exc}")
    if out_dir is None:
        out_dir = _out_root() / "runs" / Path(scenario_path).stem
    try:
        out = _prepare_out(out_dir, overwrite)
    except FileExistsError as exc:
        return CommandResult(EXIT_USAGE, log=str(exc))

    failure = None
    try:
        trace = Simulation(config).run()
    except NumericalError as exc:
        failure = str(exc)
        trace = exc.trace
    artifacts = []
    if trace is not None and trace.times.size:
        artifacts = [str(p) for p in trace.write_run_dir(out).values()]
    if failure is not None:
        return CommandResult(EXIT_NUMERICAL, artifacts,
                             f"numerical failure: {failure}\n"
                             f"partial trace written to {out}")
    lines = [
        f"run complete: {trace.n_steps} steps, {trace.n_firms} firms, "
        f"seed {trace.seed}",
        f"final HHI {trace.hhi[-1]:.4f}, mean price {trace.mean_price[-1]:.4f}, "
        f"tokens served {trace.tokens_served[-1]:.4f}",
        f"written to {out}",
    ]
    return CommandResult(EXIT_OK, artifacts, "\n".join(lines))


def cmd_study(study_name, out_dir=None, workers=1, seed=None, overwrite=False):
    if study_name not in PRESETS:
        return CommandResult(
            EXIT_USAGE,
            log=f"unknown study {study_name!r}; available: {', '.join(list_presets())}")
    if out_dir is None:
        out_dir = _out_root() / "studies" / study_name
    try:
        out = _prepare_out(out_dir, overwrite)
    except FileExistsError as exc:
        return CommandResult(EXIT_USAGE, log=str(exc))
    try:
        result = run_preset(study_name, parallelism=workers, master_seed=seed,
                            out_dir=out, overwrite=True)
    except StudyError as exc:
        return CommandResult(EXIT_USAGE, log=f"study failed to start: {exc}")

    lines = [f"study {study_name}: {len(result.rows)} runs, "
             f"{result.n_failed} failed, master seed {result.master_seed}"]
    for key, value in result.headline.items():
        lines.append(f"  {key} = {_fmt_headline(value)}")
    lines.append(f"written to {out}")
    artifacts = [str(out / "metrics.csv"), str(out / "summary.json"),
                 str(out / "config.json")]
    artifacts += [str(out / f"{name}.csv") for name in result.tables]
    if result.n_failed:
        for row in result.rows:
            if row["failed"]:
                lines.append(f"  FAILED {row['label']} (rep {row['replication']}): "
                             f"{row['failure_message']}")
        return CommandResult(EXIT_PARTIAL, artifacts, "\n".join(lines))
    return CommandResult(EXIT_OK, artifacts, "\n".join(lines))


def cmd_analyze(run_dir, metric, out_path=None, overwrite=False):
    if metric not in ANALYZE_METRICS:
        return CommandResult(
            EXIT_USAGE, log=f"unknown metric {metric!r}; "
            f"available: {', '.join(ANALYZE_METRICS)}")
    run_dir = Path(run_dir)
    try:
        trace = analysis.load_run(run_dir)
        header, rows = _metric_table(trace, metric, run_dir)
    except (FileNotFoundError, ValueError, ConfigError) as exc:
        return CommandResult(EXIT_USAGE, log=str(exc))

    if out_path is None:
        out_path = run_dir / f"analysis_{metric}.csv"
    out_path = Path(out_path)
    if out_path.exists() and not overwrite:
        return CommandResult(
            EXIT_USAGE, log=f"{out_path} exists; pass --overwrite to replace it")
    out_path.parent.mkdir(parents=True, exist_ok=True)
    with open(out_path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_csv_cell(v) for v in row) + "\n")

    lines = ["\t".join(header)]
    for row in rows:
        lines.append("\t".join(_show_cell(v) for v in row))
    lines.append(f"written to {out_path}")
    return CommandResult(EXIT_OK, [str(out_path)], "\n".join(lines))


def cmd_validate(scenario_path):
    try:
        config = load_scenario(scenario_path)
    except ConfigError as exc:
        return CommandResult(EXIT_USAGE, log=f"invalid scenario: {exc}")
    lines = [
        f"scenario OK: {scenario_path}",
        f"  firms {config.upstream.N}, horizon {config.sim.T} years at "
        f"dt {config.sim.dt}, seed {config.sim.seed}",
        f"  shocks: {len(config.shocks)}",
        f"  config hash {config.config_hash()}",
    ]
    return CommandResult(EXIT_OK, [], "\n".join(lines))


# ----------------------------------------------------------------------
# metric tables


def _metric_table(trace, metric, run_dir):
    if metric == "hhi":
        return ["time", "hhi"], list(zip(trace.times, trace.hhi))
    if metric == "cv":
        cv, degenerate = analysis.growth_rate_cv(trace)
        return (["time", "growth_cv", "degenerate"],
                [(t, c, int(d)) for t, c, d in zip(trace.times, cv, degenerate)])
    if metric == "health":
        health = analysis.ecosystem_health(trace)
        return ["time", "health"], list(zip(trace.times, health))
    if metric == "elasticity":
        shock_time = _price_shock_time(run_dir)
        resp = analysis.price_shock_response(trace, shock_time)
        return list(resp.keys()), [tuple(resp.values())]
    if metric == "stability":
        config = _run_scenario(run_dir)
        K, D, Q = analysis.steady_state_point(trace, float(trace.times[-1]))
        report = analysis.stability_report(K, D, Q, config.upstream)
        header = ["omega_actual", "omega_star", "regime",
                  "eigenvalue_max", "eigenvalue_min", "K", "D", "Q"]
        row = (report.omega_actual, report.omega_star, report.regime,
               report.eigenvalues[0], report.eigenvalues[-1], K, D, Q)
        return header, [row]
    raise ValueError(f"unknown metric {metric!r}")


def _run_scenario(run_dir):
    """The scenario a run directory was produced from (scenario.json)."""
    path = Path(run_dir) / "scenario.json"
    if not path.exists():
        raise FileNotFoundError(f"run directory is missing scenario.json: {path}")
    return ScenarioConfig.from_dict(json.loads(path.read_text()))


def _price_shock_time(run_dir):
    config = _run_scenario(run_dir)
    for shock in config.shocks:
        if shock.kind == "price_override_factor":
            return float(shock.time)
    raise ValueError(
        "elasticity metric needs a price_override_factor shock in the scenario; "
        "this run has none")


def _csv_cell(value):
    if isinstance(value, str):
        return value
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), ".17g")


def _show_cell(value):
    if isinstance(value, str):
        return value
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), ".6g")


def _fmt_headline(value):
    if isinstance(value, bool):
        return str(value)
    if isinstance(value, float):
        return format(value, ".6g")
    return str(value)


# ----------------------------------------------------------------------
# click wiring


def _finish(result):
    stream = sys.stdout if result.exit_code == EXIT_OK else sys.stderr
    if result.log:
        click.echo(result.log, file=stream)
    sys.exit(result.exit_code)


@click.group()
@click.version_option(package_name="aimarketsim")
def main():
    """Two-tier AI industry simulator: runs, studies, and analyses."""


@main.command("run")
@click.option("--scenario", "scenario_path", required=True,
              type=click.Path(), help="Scenario file (.toml or .json).")
@click.option("--out", "out_dir", type=click.Path(),
              help=f"Run directory (default ${OUT_ROOT_ENV}/runs/<name>).")
@click.option("--seed", type=int, default=None, help="Override sim.seed.")
@click.option("--overwrite", is_flag=True,
              help="Replace an existing non-empty output directory.")
def _run_cmd(scenario_path, out_dir, seed, overwrite):
    """Simulate one scenario and write its trace files."""
    _finish(cmd_run(scenario_path, out_dir, seed=seed, overwrite=overwrite))


@main.command("study")
@click.argument("study_name")
@click.option("--out", "out_dir", type=click.Path(),
              help=f"Study directory (default ${OUT_ROOT_ENV}/studies/<name>).")
@click.option("--seed", type=int, default=None, help="Master seed override.")
@click.option("--workers", type=int, default=1, show_default=True,
              help="Worker processes for the run pool.")
@click.option("--overwrite", is_flag=True,
              help="Replace an existing non-empty output directory.")
def _study_cmd(study_name, out_dir, seed, workers, overwrite):
    """Run a named preset study (exp1..exp5, mc, nsweep, stress, ablation)."""
    _finish(cmd_study(study_name, out_dir, workers=workers, seed=seed,
                      overwrite=overwrite))


@main.command("analyze")
@click.argument("run_dir", type=click.Path())
@click.option("--metric", required=True, type=click.Choice(ANALYZE_METRICS),
              help="Which metric table to compute.")
@click.option("--out", "out_path", type=click.Path(),
              help="Output CSV (default <run_dir>/analysis_<metric>.csv).")
@click.option("--overwrite", is_flag=True,
              help="Replace an existing output file.")
def _analyze_cmd(run_dir, metric, out_path, overwrite):
    """Compute one metric table from a written run directory."""
    _finish(cmd_analyze(run_dir, metric, out_path=out_path, overwrite=overwrite))


@main.command("validate")
@click.option("--scenario", "scenario_path", required=True,
              type=click.Path(), help="Scenario file to check.")
def _validate_cmd(scenario_path):
    """Parse and validate a scenario file without running it."""
    _finish(cmd_validate(scenario_path))


if __name__ == "__main__":
    main()
