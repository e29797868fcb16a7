"""Batched studies: parameter sweeps, preset experiments, ablations.

A study is a list of scenario variations run against a common base
config, each with its own derived seed, executed serially or on a
process pool.  Results are merged in run-index order so the metrics
table is byte-identical regardless of worker count.  Per-run failures
are recorded in the table and do not abort the study.

Seed derivation
---------------
Each run owns an isolated stream.  The engine seed for run ``i`` under
master seed ``m`` is the first 64-bit word of
``numpy.random.SeedSequence([m, i])`` — SeedSequence's splitmix-style
hash guarantees well-separated streams for distinct ``(m, i)`` pairs.
Monte-Carlo parameter jitter draws come from the separate stream
``SeedSequence([m, i, _JITTER_STREAM])`` so that adding or removing
jitter never perturbs the engine's own draws.

Study directory layout
----------------------
``config.json``   study manifest: base scenario, variations, seeds
``runs/<label>/`` one engine run directory per run (see engine docs)
``metrics.csv``   one row per run, fixed column order
``summary.json``  headline metrics, versions, failure list
plus any preset-specific tables (``bifurcation.csv``, ``phase.csv``, ...).
"""

from __future__ import annotations

import csv
import dataclasses
import json
import math
from dataclasses import dataclass, field
from multiprocessing import get_all_start_methods, get_context
from pathlib import Path

import numpy as np

from . import analysis
from .config import ScenarioConfig, ShockSpec, ConfigError, with_overrides
from .engine import SCHEMA_VERSION, NumericalError, Simulation

STUDY_SCHEMA_VERSION = "aimarketsim.study/1"

SEED_POLICIES = (
    "per-run",   # seed_i = splitmix(master, i); replications differ
    "shared",    # every run gets the master seed; paired comparisons
)

_JITTER_STREAM = 0x6A69  # "ji"; keeps jitter draws off the engine stream

# Metrics recorded for every run regardless of preset, pulled from the
# final trace row.  Preset-specific metrics are appended after these.
_BASE_METRICS = (
    "hhi_final", "share_max_final", "mean_price_final",
    "tokens_served_final", "expenditure_final", "depth_final",
    "agents_alive_final", "downstream_output_final",
)


class StudyError(RuntimeError):
    """Raised for malformed study specs or unusable output directories."""


# --------------------------------------------------------------------------
# study specification


@dataclass(frozen=True)
class StudySpec:
    """A named batch of scenario variations around a base config.

    ``variations`` entries are either ``(label, overrides)`` with a
    dotted-path override mapping (the key ``"shocks"`` replaces the whole
    shock list), or ``(parameter_path, values)`` which expands into one
    run per value labelled ``leaf=value``.  ``jitter`` draws a uniform
    multiplicative perturbation ``1 + width*U[-1,1]`` per listed path per
    run, on top of the variation overrides.
    """

    name: str
    base: ScenarioConfig
    variations: tuple = (("base", {}),)
    replications: int = 1
    seed_policy: str = "per-run"
    jitter: tuple = ()   # ((dotted_path, relative_width), ...)

    def __post_init__(self):
        if not self.name or not self.name.replace("_", "").replace("-", "").isalnum():
            raise StudyError(f"study name must be a slug, got {self.name!r}")
        if not isinstance(self.base, ScenarioConfig):
            raise StudyError("base must be a ScenarioConfig")
        if self.replications < 1:
            raise StudyError(f"replications must be >= 1, got {self.replications}")
        if self.seed_policy not in SEED_POLICIES:
            raise StudyError(
                f"seed_policy must be one of {SEED_POLICIES}, got {self.seed_policy!r}")
        for path, width in self.jitter:
            if not (0.0 <= width < 1.0):
                raise StudyError(f"jitter width for {path} must be in [0, 1), got {width}")
            _resolve_path(self.base, path)  # raises on unknown path
        labels = [label for label, _ in self.expanded()]
        if len(set(labels)) != len(labels):
            raise StudyError(f"variation labels must be unique, got {labels}")

    def expanded(self):
        """Normalized ``(label, overrides)`` list, sweeps unrolled."""
        out = []
        for var in self.variations:
            if len(var) != 2:
                raise StudyError(f"variation must be a 2-tuple, got {var!r}")
            tag, payload = var
            if isinstance(payload, dict):
                out.append((str(tag), dict(payload)))
            else:
                leaf = str(tag).split(".")[-1]
                for value in payload:
                    value = float(value)
                    out.append((f"{leaf}={value:g}", {str(tag): value}))
        return out

    def n_runs(self):
        return len(self.expanded()) * self.replications


@dataclass(frozen=True)
class RunDef:
    """One concrete run of a study: resolved config plus bookkeeping."""

    run_index: int
    label: str
    replication: int
    seed: int
    overrides: dict
    jitter_values: dict
    config: ScenarioConfig

    def dir_name(self, replications):
        safe = self.label.replace("/", "_").replace(" ", "_")
        if replications > 1:
            return f"{safe}_r{self.replication:03d}"
        return safe


def run_seed(master_seed, run_index):
    """Engine seed for one run: first word of SeedSequence([m, i])."""
    ss = np.random.SeedSequence([int(master_seed), int(run_index)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def _resolve_path(config, path):
    parts = path.split(".")
    if len(parts) != 2:
        raise StudyError(f"jitter path must be 'section.field', got {path!r}")
    section, name = parts
    data = config.to_dict()
    if section not in data or name not in data[section]:
        raise StudyError(f"unknown parameter path {path!r}")
    value = data[section][name]
    if not isinstance(value, (int, float)) or isinstance(value, bool):
        raise StudyError(f"jitter path {path!r} is not numeric")
    return float(value)


def _jitter_draws(spec, master_seed, run_index):
    if not spec.jitter:
        return {}
    rng = np.random.default_rng(
        np.random.SeedSequence([int(master_seed), int(run_index), _JITTER_STREAM]))
    draws = {}
    for path, width in spec.jitter:
        center = _resolve_path(spec.base, path)
        draws[path] = center * (1.0 + width * rng.uniform(-1.0, 1.0))
    return draws


def expand_runs(spec, master_seed):
    """All RunDefs for a study, in run-index order."""
    runs = []
    index = 0
    for label, overrides in spec.expanded():
        for rep in range(spec.replications):
            if spec.seed_policy == "shared":
                seed = int(master_seed)
            else:
                seed = run_seed(master_seed, index)
            jitter_values = _jitter_draws(spec, master_seed, index)
            merged = dict(overrides)
            merged.update(jitter_values)
            merged["sim.seed"] = seed
            try:
                config = with_overrides(spec.base, merged)
            except ConfigError as exc:
                raise StudyError(f"variation {label!r} is invalid: {exc}") from exc
            runs.append(RunDef(index, label, rep, seed, overrides, jitter_values, config))
            index += 1
    return runs


# --------------------------------------------------------------------------
# execution


def _execute(item):
    """Worker body: run one config, never raise.  Returns a payload tuple."""
    run_index, config = item
    try:
        trace = Simulation(config).run()
        return run_index, trace, False, ""
    except NumericalError as exc:
        return run_index, exc.trace, True, str(exc)
    except Exception as exc:  # config/engine bugs: record, keep the study alive
        return run_index, None, True, f"{type(exc).__name__}: {exc}"


@dataclass
class StudyResult:
    """Everything a finished study produced, ordered by run index."""

    spec: StudySpec
    master_seed: int
    run_defs: list
    rows: list                      # one dict per run, metrics.csv content
    columns: list                   # metrics.csv column order
    traces: dict = field(default_factory=dict)   # (label, rep) -> trace | None
    headline: dict = field(default_factory=dict)
    tables: dict = field(default_factory=dict)   # name -> (header, rows)

    @property
    def n_failed(self):
        return sum(1 for r in self.rows if r["failed"])

    def trace(self, label, replication=0):
        return self.traces[(label, replication)]

    def row(self, label, replication=0):
        for r in self.rows:
            if r["label"] == label and r["replication"] == replication:
                return r
        raise KeyError(f"no run labelled {label!r} (rep {replication})")

    def metrics_csv_text(self):
        """The exact metrics.csv content (determinism is tested on this)."""
        lines = [",".join(self.columns)]
        for row in self.rows:
            lines.append(",".join(_cell(row.get(c)) for c in self.columns))
        return "\n".join(lines) + "\n"

    def summary_dict(self):
        import platform

        try:
            from importlib.metadata import version

            pkg_version = version("aimarketsim")
        except Exception:  # pragma: no cover - not installed
            pkg_version = "unknown"
        return {
            "schema_version": STUDY_SCHEMA_VERSION,
            "run_schema_version": SCHEMA_VERSION,
            "study": self.spec.name,
            "master_seed": self.master_seed,
            "seed_policy": self.spec.seed_policy,
            "replications": self.spec.replications,
            "n_runs": len(self.rows),
            "n_failed": self.n_failed,
            "failed_runs": [r["run_index"] for r in self.rows if r["failed"]],
            "base_config_hash": self.spec.base.config_hash(),
            "package_version": pkg_version,
            "numpy_version": np.__version__,
            "headline": self.headline,
        }

    def manifest_dict(self):
        return {
            "schema_version": STUDY_SCHEMA_VERSION,
            "study": self.spec.name,
            "master_seed": self.master_seed,
            "seed_policy": self.spec.seed_policy,
            "replications": self.spec.replications,
            "jitter": [[path, width] for path, width in self.spec.jitter],
            "base": self.spec.base.to_dict(),
            "runs": [
                {
                    "run_index": rd.run_index,
                    "label": rd.label,
                    "replication": rd.replication,
                    "seed": rd.seed,
                    "overrides": _jsonable_overrides(rd.overrides),
                    "jitter": rd.jitter_values,
                }
                for rd in self.run_defs
            ],
        }

    def write(self, out_dir, overwrite=False):
        """Write the full study directory; returns its path."""
        out = _prepare_dir(out_dir, overwrite)
        with open(out / "config.json", "w") as fh:
            json.dump(self.manifest_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")
        runs_dir = out / "runs"
        for rd in self.run_defs:
            trace = self.traces.get((rd.label, rd.replication))
            if trace is not None and trace.times.size:
                trace.write_run_dir(runs_dir / rd.dir_name(self.spec.replications))
        (out / "metrics.csv").write_text(self.metrics_csv_text())
        with open(out / "summary.json", "w") as fh:
            json.dump(self.summary_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")
        for name, (header, rows) in self.tables.items():
            with open(out / f"{name}.csv", "w", newline="") as fh:
                writer = csv.writer(fh, lineterminator="\n")
                writer.writerow(header)
                for row in rows:
                    writer.writerow([_cell(v) for v in row])
        return out


def _cell(value):
    if value is None:
        return ""
    if isinstance(value, str):
        # commas inside messages would shift columns; quote-free escape
        return value.replace(",", ";").replace("\n", " ")
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), ".17g")


def _jsonable_overrides(overrides):
    out = {}
    for key, value in overrides.items():
        if key == "shocks":
            out[key] = [dataclasses.asdict(s) if isinstance(s, ShockSpec) else dict(s)
                        for s in value]
        else:
            out[key] = value
    return out


def _prepare_dir(out_dir, overwrite):
    out = Path(out_dir)
    if out.exists() and any(out.iterdir()):
        if not overwrite:
            raise FileExistsError(
                f"study directory {out} exists and is not empty; pass overwrite")
        import shutil

        shutil.rmtree(out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _base_metric_values(trace):
    out = {name: math.nan for name in _BASE_METRICS}
    if trace is None or trace.times.size == 0:
        return out
    out["hhi_final"] = float(trace.hhi[-1])
    out["share_max_final"] = float(trace.share[-1].max())
    out["mean_price_final"] = float(trace.mean_price[-1])
    out["tokens_served_final"] = float(trace.tokens_served[-1])
    out["expenditure_final"] = float(trace.expenditure[-1])
    out["depth_final"] = float(trace.depth[-1])
    out["agents_alive_final"] = float(trace.agents_alive[-1])
    out["downstream_output_final"] = float(trace.downstream_output[-1])
    return out


def run_study(spec, parallelism=1, master_seed=None, extra_metrics=None):
    """Execute every run of a study; deterministic for a fixed master seed.

    ``extra_metrics`` maps column names to ``fn(trace) -> float``; a
    metric that raises on some trace records NaN there instead of
    failing the study.  Results are merged in run-index order, so the
    metrics table does not depend on ``parallelism``.
    """
    if master_seed is None:
        master_seed = spec.base.sim.seed
    extra_metrics = dict(extra_metrics or {})
    run_defs = expand_runs(spec, master_seed)
    items = [(rd.run_index, rd.config) for rd in run_defs]

    if parallelism > 1 and len(items) > 1:
        ctx = get_context("fork") if "fork" in get_all_start_methods() \
            else get_context()
        with ctx.Pool(min(parallelism, len(items))) as pool:
            payloads = list(pool.imap_unordered(_execute, items, chunksize=1))
    else:
        payloads = [_execute(item) for item in items]
    payloads.sort(key=lambda p: p[0])

    columns = ["run_index", "label", "replication", "seed", "failed", "failure_message"]
    columns += list(_BASE_METRICS)
    jitter_cols = [path.split(".")[-1] + "_draw" for path, _ in spec.jitter]
    columns += jitter_cols
    columns += list(extra_metrics)

    rows, traces = [], {}
    for rd, (_, trace, failed, message) in zip(run_defs, payloads):
        traces[(rd.label, rd.replication)] = trace
        row = {
            "run_index": rd.run_index,
            "label": rd.label,
            "replication": rd.replication,
            "seed": rd.seed,
            "failed": bool(failed),
            "failure_message": message,
        }
        row.update(_base_metric_values(trace))
        for col, (path, _) in zip(jitter_cols, spec.jitter):
            row[col] = rd.jitter_values.get(path, math.nan)
        for name, fn in extra_metrics.items():
            value = math.nan
            if trace is not None and trace.times.size:
                try:
                    value = float(fn(trace))
                except Exception:
                    value = math.nan
            row[name] = value
        rows.append(row)

    return StudyResult(spec=spec, master_seed=int(master_seed), run_defs=run_defs,
                       rows=rows, columns=columns, traces=traces)


# --------------------------------------------------------------------------
# shared preset ingredients


def _row_at(trace, time):
    """Index of the trace row at simulation time ``time``."""
    idx = int(np.searchsorted(trace.times, time - 1e-9))
    if idx >= trace.times.size:
        raise ValueError(f"time {time} beyond trace horizon {trace.times[-1]}")
    return idx


# Downstream dynamics frozen: orchestration capital static, no entry.
# Experiments about upstream mechanisms use this so that token demand
# responds to prices but not to an evolving agent population, which
# keeps the measured dynamics attributable to the channel under study.
_STATIC_AGENTS = {
    "downstream.phi_learn": 0.0,
    "downstream.mu_O": 0.0,
    "downstream.xi_cann": 0.0,
    "downstream.entry_rate": 0.0,
}


def _share_logslope(firm, t0, t1):
    """Metric: OLS slope of ln share_firm over [t0, t1]."""

    def fn(trace):
        lo, hi = _row_at(trace, t0), _row_at(trace, t1)
        window = slice(lo, hi + 1)
        shares = trace.share[window, firm]
        if np.any(shares <= 0):
            return math.nan
        return float(np.polyfit(trace.times[window], np.log(shares), 1)[0])

    return fn


def _value_at(attr, time, firm=None):
    def fn(trace):
        idx = _row_at(trace, time)
        arr = getattr(trace, attr)
        return float(arr[idx] if firm is None else arr[idx, firm])

    return fn


def _max_after(attr, time, firms=slice(None)):
    def fn(trace):
        idx = _row_at(trace, time)
        return float(getattr(trace, attr)[idx:, firms].max())

    return fn


def _health_at(time):
    def fn(trace):
        return float(analysis.ecosystem_health(trace)[_row_at(trace, time)])

    return fn


def _cv_at(time, window=1.0):
    def fn(trace):
        cv, degenerate = analysis.growth_rate_cv(trace, window=window)
        idx = _row_at(trace, time)
        return math.nan if degenerate[idx] else float(cv[idx])

    return fn


# --------------------------------------------------------------------------
# preset experiments


@dataclass(frozen=True)
class Preset:
    name: str
    description: str
    build: object      # fn() -> (StudySpec, extra_metrics dict)
    post: object       # fn(StudyResult) -> None; fills headline/tables


def _exp1_build():
    base = with_overrides(ScenarioConfig(), {
        "upstream.stock_depreciation": "full",
        "sim.T": 12.0,
        **_STATIC_AGENTS,
    })
    boost = ShockSpec(kind="rd_boost", time=5.0, magnitude=0.5, target=0)
    spec = StudySpec(
        name="exp1", base=base, seed_policy="shared",
        variations=(
            ("control", {}),
            ("shock", {"shocks": (boost,)}),
        ),
    )
    extras = {
        "leader_share_t10": _value_at("share", 10.0, firm=0),
        "laggard_delta_max": _max_after("delta_econ", 5.0, firms=slice(1, None)),
        "gap_max_final": lambda tr: float(tr.gap[-1].max()),
    }
    return spec, extras


def _exp1_post(result):
    shock = result.row("shock")
    control = result.row("control")
    result.headline = {
        "leader_share_t10": shock["leader_share_t10"],
        "laggard_delta_max": shock["laggard_delta_max"],
        "control_hhi_final": control["hhi_final"],
        "shock_hhi_final": shock["hhi_final"],
    }


# Heterogeneous starting stocks for the convergence arm: spread wide
# enough that the trailing growth-rate CV starts near 0.8, the value the
# convergence band is measured against.
_EXP2_SPREAD = (3.0, 1.0, 0.45, 0.16)

# Convergence-arm economy: softer differentiation (theta) so laggards
# keep enough revenue to reinvest, a hotter reinvestment rate and a
# small starting scale so stocks relax to the common frontier path well
# within the horizon, a quasi-frozen data stock (mu_D ~ 0 freezes both
# inflow eta = eta_over_mu * mu_D and decay) so the flywheel cannot
# re-amplify the initial dispersion, and no share-gap depreciation term
# for the same reason.
_EXP2_CONVERGENCE = {
    "upstream.k0_multipliers": _EXP2_SPREAD,
    "upstream.theta": 0.3,
    "upstream.invest_rate": 0.6,
    "upstream.K0": 18.0,
    "upstream.mu_D": 1e-6,
    "upstream.delta2": 0.0,
    "upstream.stock_depreciation": "full",
}


def _exp2_build():
    base = with_overrides(ScenarioConfig(), {"sim.T": 12.0, **_STATIC_AGENTS})
    stop = ShockSpec(kind="rd_stop", time=5.0, target=0)
    catchup = ShockSpec(kind="rd_multiplier", time=5.0, magnitude=3.0,
                        target=3, until=8.0)
    spec = StudySpec(
        name="exp2", base=base, seed_policy="shared",
        variations=(
            ("control", {}),
            # theta = 2.05 puts the frozen firm's effective depreciation
            # (markup-feedback included) on the delta0 + delta1 * g_A
            # structural rate of 0.23/yr.
            ("stop", {"upstream.theta": 2.05, "shocks": (stop,)}),
            ("catchup", {"upstream.k0_multipliers": (1.0, 1.0, 1.0, 0.8),
                         "shocks": (catchup,)}),
            ("convergence", _EXP2_CONVERGENCE),
        ),
    )
    extras = {
        "share0_logslope_5_8": _share_logslope(0, 5.0, 8.0),
        "share3_t5": _value_at("share", 5.0, firm=3),
        # read at the end of the boost window; the gain is transient and
        # partially unwinds once investment reverts
        "share3_t8": _value_at("share", 8.0, firm=3),
        "cv_t0": _cv_at(0.5, window=0.5),
        "cv_t10": _cv_at(10.0, window=0.5),
    }
    return spec, extras


def _exp2_post(result):
    stop = result.row("stop")
    result.headline = {
        "share_decay_rate": -stop["share0_logslope_5_8"],
        "theory_decay_rate": (result.spec.base.upstream.delta0
                              + result.spec.base.upstream.delta1
                              * result.spec.base.frontier.g_A),
        "catchup_share_gain": (result.row("catchup")["share3_t8"]
                               - result.row("catchup")["share3_t5"]),
        "convergence_cv_initial": result.row("convergence")["cv_t0"],
        "convergence_cv_t10": result.row("convergence")["cv_t10"],
    }


def _exp3_build():
    # Architecture returns are lifted from the conservative default so
    # depth is an active margin here: the cheaper-token response then
    # runs through both channels (thicker margin raises output; deeper
    # chains raise tokens per unit of output), which is what pushes the
    # arc elasticity past 1 in magnitude.
    base = with_overrides(ScenarioConfig(), {"sim.T": 10.0, **_STATIC_AGENTS,
                                             "downstream.phi_arch": 1.6})
    override = ShockSpec(kind="price_override_factor", time=5.0, magnitude=0.5)
    spec = StudySpec(
        name="exp3", base=base, seed_policy="shared",
        variations=(
            ("control", {}),
            ("shock", {"shocks": (override,)}),
        ),
    )

    def elasticity(trace):
        return analysis.price_shock_response(trace, 5.0)["elasticity"]

    def expenditure_ratio(trace):
        resp = analysis.price_shock_response(trace, 5.0)
        return resp["expenditure_post"] / resp["expenditure_pre"]

    def depth_ratio(trace):
        resp = analysis.price_shock_response(trace, 5.0)
        return resp["depth_post"] / max(resp["depth_pre"], 1e-300)

    extras = {
        "arc_elasticity": elasticity,
        "expenditure_ratio": expenditure_ratio,
        "depth_ratio": depth_ratio,
        "depth_pre": lambda tr: analysis.price_shock_response(tr, 5.0)["depth_pre"],
        "depth_post": lambda tr: analysis.price_shock_response(tr, 5.0)["depth_post"],
    }
    return spec, extras


def _exp3_post(result):
    shock = result.row("shock")
    result.headline = {
        "arc_elasticity": shock["arc_elasticity"],
        "expenditure_ratio": shock["expenditure_ratio"],
        "depth_ratio": shock["depth_ratio"],
    }


# Experiment-4 economy: overbuilt stocks (K0 well above the flow a firm
# can replace) with one firm seeded 15% ahead, and a large common data
# endowment that decays toward the usage-fed steady state.  While the
# endowment lasts, relative data tracks relative demand at rate
# eta*Q/D ~ omega, so the flywheel intensity itself dials the loop gain
# on the seeded lead: below the flip the lead damps out before reaching
# the displacement margin, above it the lead crosses gap_activation and
# delta2 resolves the tip within the horizon.  Substitutes CES
# (rho=0.5) keeps the compute channel from drowning the data channel,
# and theta/alpha are set so the closed-form threshold stays inside the
# sweep window at delta2/mu_D values fast enough to finish the
# collapse.  Constants from the search in scripts/calibrate.py.
_EXP4_LEVELS = {
    "upstream.stock_depreciation": "gap",
    "upstream.rho_ces": 0.5,
    "upstream.theta": 3.1,
    "upstream.alpha": 0.15,
    "upstream.delta2": 2.4,
    "upstream.mu_D": 0.5,
    "upstream.D0": 2.4,
    "upstream.gap_activation": 0.31,
    "upstream.k0_multipliers": (1.15, 1.0, 1.0, 1.0),
    "upstream.K0": 60.0,
    "frontier.A0": 60.0,
    "sim.T": 20.0,
    **_STATIC_AGENTS,
}

_EXP4_GRID = tuple(np.linspace(0.5, 2.5, 21))


def _exp4_build():
    base = with_overrides(ScenarioConfig(), _EXP4_LEVELS)
    spec = StudySpec(
        name="exp4", base=base, seed_policy="shared",
        variations=(("upstream.eta_over_mu", _EXP4_GRID),),
    )
    return spec, {}


def _exp4_post(result):
    omegas, hhis = [], []
    for rd, row in zip(result.run_defs, result.rows):
        if row["failed"]:
            continue
        omegas.append(rd.overrides["upstream.eta_over_mu"])
        hhis.append(row["hhi_final"])
    detection = analysis.detect_bifurcation(omegas, hhis)
    closed_form = analysis.flywheel_threshold(result.spec.base.upstream)
    threshold = detection.threshold if detection.detected else math.nan
    header = ["eta_over_mu", "hhi_final", "above_threshold"]
    rows = [(w, h, int(detection.detected and w > threshold))
            for w, h in zip(omegas, hhis)]
    result.tables["bifurcation"] = (header, rows)
    below = [h for w, h in zip(omegas, hhis) if detection.detected and w < threshold]
    above = [h for w, h in zip(omegas, hhis) if detection.detected and w > threshold]
    result.headline = {
        "detected": detection.detected,
        "threshold": threshold,
        "closed_form_threshold": closed_form,
        "hhi_jump": detection.jump if detection.detected else math.nan,
        "sub_threshold_hhi_max": max(below) if below else math.nan,
        "super_threshold_hhi_min": min(above) if above else math.nan,
    }


# Experiment-5 economy.  Upstream: substitutes CES plus a large,
# slowly-decaying data endowment pins the compute share of marginal cost
# near zero, so upstream quality tracks the frontier cleanly and faster
# g_A reaches agents as better capital instead of leaking away through
# compute congestion.  Downstream: entry off and the wage frozen so the
# health series tracks the incumbent cohort; phi_learn subcritical
# everywhere on the grid (the learning inflow scales like O^1.5 K and
# explodes in finite time past the critical rate); O_init low enough
# that token demand stays under upstream capacity at every grid cell for
# the whole horizon — past the cap, congestion rationing turns the
# sampled series into garbage.  Constants from scripts/calibrate.py.
_EXP5_AGENTS = {
    "upstream.rho_ces": 0.5,
    "upstream.D0": 5.0,
    "upstream.mu_D": 0.01,
    "upstream.delta0": 0.25,
    "downstream.phi_learn": 0.001,
    "downstream.mu_O": 0.03,
    "downstream.entry_rate": 0.0,
    "downstream.wage_growth": 0.0,
    "downstream.O_init_logmean": -4.6,
    "sim.T": 16.0,
}

_EXP5_GA = (0.0, 0.05, 0.10, 0.15, 0.20)
_EXP5_XI = (0.0, 0.2, 0.4, 0.6, 0.8)


def _exp5_build():
    base = with_overrides(ScenarioConfig(), _EXP5_AGENTS)
    variations = tuple(
        (f"gA={g:g}_xi={x:g}", {"frontier.g_A": g, "downstream.xi_cann": x})
        for g in _EXP5_GA for x in _EXP5_XI
    )
    spec = StudySpec(name="exp5", base=base, seed_policy="shared",
                     variations=variations)
    extras = {
        "health_t15": _health_at(15.0),
        "output_t15": _value_at("downstream_output", 15.0),
        "alive_t15": _value_at("agents_alive", 15.0),
    }
    return spec, extras


def _exp5_post(result):
    header = ["g_A", "xi_cann", "health_t15", "output_t15", "alive_t15"]
    rows = []
    for rd, row in zip(result.run_defs, result.rows):
        rows.append((rd.overrides["frontier.g_A"], rd.overrides["downstream.xi_cann"],
                     row["health_t15"], row["output_t15"], row["alive_t15"]))
    result.tables["phase"] = (header, rows)
    trap = result.row("gA=0.2_xi=0.4")
    benign = result.row("gA=0_xi=0")
    monotone = True
    for x in (0.0, 0.2):
        outputs = [result.row(f"gA={g:g}_xi={x:g}")["output_t15"] for g in _EXP5_GA]
        diffs = np.diff(outputs)
        if np.any(diffs < -1e-9 * np.abs(np.asarray(outputs[:-1]))):
            monotone = False
    result.headline = {
        "trap_health_t15": trap["health_t15"],
        "benign_health_t15": benign["health_t15"],
        "output_monotone_low_xi": monotone,
    }


# Monte Carlo: the firm-0 data advantage seeds mild asymmetry so the
# jittered depreciation/flywheel parameters have something to act on;
# otherwise every symmetric run would pin HHI at exactly 1/N.  The edge
# and horizon are set so the typical draw concentrates moderately:
# divergence compounds roughly exponentially in T, so a year or two
# more would push the whole distribution against the monopoly end and
# bury the parameter sensitivity the jitter is supposed to reveal.
_MC_BASE = {
    "upstream.stock_depreciation": "full",
    "upstream.d0_multipliers": (1.05, 1.0, 1.0, 1.0),
    "sim.T": 7.0,
    **_STATIC_AGENTS,
}

_MC_JITTER = (
    ("upstream.delta1", 0.2),
    ("upstream.delta2", 0.2),
    ("upstream.eta_over_mu", 0.2),
    ("upstream.theta", 0.2),
)


def _mc_build():
    base = with_overrides(ScenarioConfig(), _MC_BASE)
    spec = StudySpec(name="mc", base=base, variations=(("draw", {}),),
                     replications=500, seed_policy="per-run", jitter=_MC_JITTER)
    return spec, {}


def _mc_post(result):
    hhis = np.array([r["hhi_final"] for r in result.rows if not r["failed"]])
    counts, edges = np.histogram(hhis, bins=20, range=(0.2, 1.0))
    result.tables["hhi_hist"] = (
        ["bin_left", "bin_right", "count"],
        [(edges[i], edges[i + 1], int(counts[i])) for i in range(len(counts))],
    )
    result.headline = {
        "median_hhi": float(np.median(hhis)) if hhis.size else math.nan,
        "q25_hhi": float(np.percentile(hhis, 25)) if hhis.size else math.nan,
        "q75_hhi": float(np.percentile(hhis, 75)) if hhis.size else math.nan,
        "n_completed": int(hhis.size),
    }


_NSWEEP_N = (2, 4, 8, 16)


def _nsweep_build():
    base = with_overrides(ScenarioConfig(), {
        "upstream.stock_depreciation": "full",
        "sim.T": 20.0,
        **_STATIC_AGENTS,
    })
    variations = []
    for n in _NSWEEP_N:
        edge = (1.1,) + (1.0,) * (n - 1)
        variations.append((f"N={n}", {"upstream.N": n,
                                      "upstream.d0_multipliers": edge}))
    spec = StudySpec(name="nsweep", base=base, seed_policy="shared",
                     variations=tuple(variations))
    return spec, {}


def _nsweep_post(result):
    header = ["n_firms", "hhi_final", "one_over_n", "ratio"]
    rows = []
    for n in _NSWEEP_N:
        hhi = result.row(f"N={n}")["hhi_final"]
        rows.append((n, hhi, 1.0 / n, hhi * n))
    result.tables["concentration"] = (header, rows)
    result.headline = {f"hhi_n{n}": r[1] for n, r in zip(_NSWEEP_N, rows)}
    result.headline["min_ratio_to_uniform"] = min(r[3] for r in rows)


_STRESS_SHOCK_TIME = 15.0


def _stress_build():
    base = with_overrides(ScenarioConfig(), {"sim.T": 20.0, **_STATIC_AGENTS})
    jump = ShockSpec(kind="frontier_jump_factor", time=_STRESS_SHOCK_TIME,
                     magnitude=1.3)
    dip = ShockSpec(kind="demand_scale_factor", time=_STRESS_SHOCK_TIME,
                    magnitude=0.5)
    spec = StudySpec(
        name="stress", base=base, seed_policy="shared",
        variations=(
            ("control", {}),
            ("frontier_jump", {"shocks": (jump,)}),
            ("demand_dip", {"shocks": (dip,)}),
        ),
    )
    return spec, {}


def recovery_time(trace, reference, shock_time, tolerance=0.05):
    """Years until HHI and every share stay within ``tolerance`` of the
    reference trajectory from the shock onward.  Returns ``(time,
    recovered)``; ``(nan, False)`` if the horizon ends first."""
    start = _row_at(trace, shock_time)
    hhi_dev = np.abs(trace.hhi - reference.hhi) / np.abs(reference.hhi)
    share_dev = np.abs(trace.share - reference.share) / np.maximum(
        np.abs(reference.share), 1e-12)
    within = (hhi_dev <= tolerance) & (share_dev.max(axis=1) <= tolerance)
    ok_from = np.flip(np.logical_and.accumulate(np.flip(within[start:])))
    if not ok_from.any():
        return math.nan, False
    first = int(np.argmax(ok_from))
    return float(trace.times[start + first] - shock_time), True


def _stress_post(result):
    control = result.trace("control")
    header = ["label", "recovery_time", "recovered"]
    rows = []
    for label in ("frontier_jump", "demand_dip"):
        trace = result.trace(label)
        if trace is None or control is None:
            rows.append((label, math.nan, 0))
            continue
        time, ok = recovery_time(trace, control, _STRESS_SHOCK_TIME)
        rows.append((label, time, int(ok)))
    result.tables["recovery"] = (header, rows)
    result.headline = {f"recovery_{label}": time for label, time, _ in rows}
    result.headline.update(
        {f"recovered_{label}": bool(ok) for label, _, ok in rows})


# Ablation arms run on the experiment-4 economy just above its tipping
# point.  Further into the super-threshold region the data channel
# alone concentrates the market noticeably even with delta2 off, which
# would blur what the knockout is meant to isolate.
_ABLATION_OMEGA = 1.2


def _ablation_build():
    base = with_overrides(ScenarioConfig(), {
        **_EXP4_LEVELS, "upstream.eta_over_mu": _ABLATION_OMEGA,
    })
    spec = StudySpec(
        name="ablation", base=base, seed_policy="shared",
        variations=(
            ("full", {}),
            ("no_red_queen", {"upstream.delta2": 0.0}),
            ("no_flywheel", {"upstream.eta_over_mu": 0.0}),
        ),
    )
    return spec, {}


def _ablation_post(result):
    full = result.row("full")["hhi_final"]
    header = ["label", "hhi_final", "delta_vs_full"]
    rows = []
    for label in ("full", "no_red_queen", "no_flywheel"):
        hhi = result.row(label)["hhi_final"]
        rows.append((label, hhi, full - hhi))
    result.tables["ablation"] = (header, rows)
    n = result.spec.base.upstream.N
    result.headline = {
        "hhi_full": full,
        "hhi_no_red_queen": result.row("no_red_queen")["hhi_final"],
        "hhi_no_flywheel": result.row("no_flywheel")["hhi_final"],
        "uniform_hhi": 1.0 / n,
    }


PRESETS = {
    "exp1": Preset("exp1", "R&D shock: laggard displacement spiral",
                   _exp1_build, _exp1_post),
    "exp2": Preset("exp2", "Depreciation: stagnation decay, catch-up, convergence",
                   _exp2_build, _exp2_post),
    "exp3": Preset("exp3", "Demand response to a 50% token price cut",
                   _exp3_build, _exp3_post),
    "exp4": Preset("exp4", "Flywheel intensity sweep and bifurcation detection",
                   _exp4_build, _exp4_post),
    "exp5": Preset("exp5", "Downstream viability over (g_A, xi_cann)",
                   _exp5_build, _exp5_post),
    "mc": Preset("mc", "Monte Carlo robustness of final concentration",
                 _mc_build, _mc_post),
    "nsweep": Preset("nsweep", "Final concentration vs number of firms",
                     _nsweep_build, _nsweep_post),
    "stress": Preset("stress", "Frontier jump and demand dip recovery",
                     _stress_build, _stress_post),
    "ablation": Preset("ablation", "Mechanism knockouts on the sweep economy",
                       _ablation_build, _ablation_post),
}


def list_presets():
    return sorted(PRESETS)


def run_preset(name, parallelism=1, master_seed=None, out_dir=None, overwrite=False):
    """Build, run, and post-process one named preset study."""
    if name not in PRESETS:
        known = ", ".join(list_presets())
        raise StudyError(f"unknown study {name!r}; available: {known}")
    preset = PRESETS[name]
    spec, extras = preset.build()
    result = run_study(spec, parallelism=parallelism, master_seed=master_seed,
                       extra_metrics=extras)
    preset.post(result)
    if out_dir is not None:
        result.write(out_dir, overwrite=overwrite)
    return result


def run_ablation(base=None, parallelism=1, master_seed=None):
    """The three-arm mechanism comparison; uses the preset economy when
    no base config is given."""
    if base is None:
        return run_preset("ablation", parallelism=parallelism,
                          master_seed=master_seed)
    spec = StudySpec(
        name="ablation", base=base, seed_policy="shared",
        variations=(
            ("full", {}),
            ("no_red_queen", {"upstream.delta2": 0.0}),
            ("no_flywheel", {"upstream.eta_over_mu": 0.0}),
        ),
    )
    result = run_study(spec, parallelism=parallelism, master_seed=master_seed)
    _ablation_post(result)
    return result


def run_stress(base=None, parallelism=1, master_seed=None):
    """Recovery after a frontier jump and a demand contraction."""
    if base is None:
        return run_preset("stress", parallelism=parallelism,
                          master_seed=master_seed)
    if base.sim.T <= _STRESS_SHOCK_TIME:
        raise StudyError(f"stress study needs T > {_STRESS_SHOCK_TIME}")
    jump = ShockSpec(kind="frontier_jump_factor", time=_STRESS_SHOCK_TIME,
                     magnitude=1.3)
    dip = ShockSpec(kind="demand_scale_factor", time=_STRESS_SHOCK_TIME,
                    magnitude=0.5)
    spec = StudySpec(
        name="stress", base=base, seed_policy="shared",
        variations=(
            ("control", {}),
            ("frontier_jump", {"shocks": (jump,)}),
            ("demand_dip", {"shocks": (dip,)}),
        ),
    )
    result = run_study(spec, parallelism=parallelism, master_seed=master_seed)
    _stress_post(result)
    return result
