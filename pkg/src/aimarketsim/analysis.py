"""Post-run analytics: stability, concentration, elasticities, health.

Everything here is a pure function of either parameters or an immutable
trace; nothing mutates simulator state.  The linearized flywheel system
couples a firm's log-capability deviation x = d ln K and log-data
deviation z = d ln D around a symmetric growth path:

    dx/dt = -delta2 * x + gamma*(1-alpha)*(K/D)... (in levels: see
    flywheel_jacobian) -- the sign structure is what matters: the
    competitive-gap penalty damps capability deviations while the
    usage->data->capability loop amplifies them.  The loop gain crosses
    unity at eta/mu_D = delta2 / (mu_D * theta * gamma * (1-alpha)).
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "BifurcationResult",
    "StabilityReport",
    "TraceView",
    "arc_elasticity",
    "detect_bifurcation",
    "ecosystem_health",
    "flywheel_jacobian",
    "flywheel_threshold",
    "growth_rate_cv",
    "hhi",
    "load_run",
    "price_shock_response",
    "stability_report",
    "steady_state_point",
]


# ----------------------------------------------------------------------
# flywheel stability

def flywheel_jacobian(K, D, Q, params):
    """Linearized (capability, data) system at a symmetric point.

    Rows follow the perturbation system: the capability row is damped by
    the gap penalty delta2 and driven by data through the CES exposure
    gamma*(1-alpha)*K/D; the data row is driven by demand feedback
    eta*theta*Q/K and damped by data decay mu_D.
    """
    if K <= 0 or D <= 0 or Q <= 0:
        raise ValueError(f"steady state must be positive, got K={K} D={D} Q={Q}")
    g_d = params.gamma_scale * (1.0 - params.alpha)
    return np.array([
        [-params.delta2, g_d * K / D],
        [params.eta * params.theta * Q / K, -params.mu_D],
    ])


def flywheel_threshold(params):
    """Critical flywheel intensity (eta/mu_D)* above which the symmetric
    oligopoly loses stability: delta2 / (mu_D * theta * gamma * (1-alpha)).
    """
    denom = params.mu_D * params.theta * params.gamma_scale * (1.0 - params.alpha)
    if denom <= 0:
        raise ValueError("threshold undefined: mu_D*theta*gamma*(1-alpha) must be > 0")
    return params.delta2 / denom


@dataclass(frozen=True)
class StabilityReport:
    """Jacobian, eigenvalues and regime call for one parameterization."""

    jacobian: np.ndarray
    eigenvalues: tuple      # real parts, descending
    regime: str             # "stable_oligopoly" | "winner_takes_all"
    omega_star: float       # critical eta/mu_D
    omega_actual: float     # configured eta/mu_D


def stability_report(K, D, Q, params):
    J = flywheel_jacobian(K, D, Q, params)
    eig = np.linalg.eigvals(J)
    real = tuple(sorted((float(v.real) for v in eig), reverse=True))
    regime = "winner_takes_all" if real[0] > 0 else "stable_oligopoly"
    return StabilityReport(
        jacobian=J,
        eigenvalues=real,
        regime=regime,
        omega_star=flywheel_threshold(params),
        omega_actual=params.eta_over_mu,
    )


def steady_state_point(trace, time):
    """(K, D, Q) per-firm means at ``time``, for feeding the Jacobian.

    The paper-style baseline never tabulates its growth-path levels, so
    stability is evaluated at the simulated state: cross-firm means of
    capability, data and served tokens at the requested row.
    """
    k = _row_at(trace, time)
    K = float(trace.capability[k].mean())
    D = float(trace.data[k].mean())
    Q = float(trace.quantity[k].mean())
    return K, D, Q


# ----------------------------------------------------------------------
# concentration and elasticity

def hhi(shares):
    """Herfindahl index of a share vector; insists shares are normalized."""
    s = np.asarray(shares, dtype=float)
    if np.any(s < 0):
        raise ValueError("shares must be nonnegative")
    total = float(s.sum())
    if abs(total - 1.0) > 1e-6:
        raise ValueError(f"shares must sum to 1 within 1e-6, got {total!r}")
    return float(np.dot(s, s))


def arc_elasticity(p0, p1, Q0, Q1):
    """Log-ratio elasticity ln(Q1/Q0)/ln(p1/p0) between two observations."""
    for name, v in (("p0", p0), ("p1", p1), ("Q0", Q0), ("Q1", Q1)):
        if v <= 0:
            raise ValueError(f"arc_elasticity needs positive inputs, {name}={v}")
    if p0 == p1:
        raise ValueError("arc_elasticity undefined at equal prices")
    return math.log(Q1 / Q0) / math.log(p1 / p0)


def price_shock_response(trace, shock_time, settle_steps=2):
    """Pre/post observation pair around a price shock, plus derived metrics.

    The pre row is the last one strictly before the shock; the post row
    sits ``settle_steps`` after activation so the one-step planning lag
    in the engine has passed through (demand responds one step late).
    Returns a dict with prices, served tokens, expenditure, depth and
    the measured arc elasticity.
    """
    i1 = _row_at(trace, shock_time)
    i0 = i1 - 1
    i2 = i1 + settle_steps
    if i0 < 0 or i2 >= trace.times.size:
        raise ValueError("shock too close to the trace boundary to measure")
    p0, p1 = float(trace.mean_price[i0]), float(trace.mean_price[i2])
    q0, q1 = float(trace.tokens_served[i0]), float(trace.tokens_served[i2])
    return {
        "time_pre": float(trace.times[i0]),
        "time_post": float(trace.times[i2]),
        "price_pre": p0,
        "price_post": p1,
        "tokens_pre": q0,
        "tokens_post": q1,
        "expenditure_pre": float(trace.expenditure[i0]),
        "expenditure_post": float(trace.expenditure[i2]),
        "depth_pre": float(trace.depth[i0]),
        "depth_post": float(trace.depth[i2]),
        "elasticity": arc_elasticity(p0, p1, q0, q1),
    }


# ----------------------------------------------------------------------
# trace series

def growth_rate_cv(trace, window=1.0):
    """Cross-firm dispersion of trailing log-capability growth.

    For each row t >= window, each firm's annualized growth over the
    trailing window is (ln K_i(t) - ln K_i(t-w))/w; the series is the
    cross-firm std/mean (population std).  Entries are NaN before one
    window has elapsed and wherever the cross-firm mean growth is within
    1e-12 of zero (flagged degenerate rather than blowing up).
    """
    times = trace.times
    dt = float(times[1] - times[0]) if times.size > 1 else 1.0
    lag = int(round(window / dt))
    if lag < 1:
        raise ValueError(f"window {window} shorter than one step")
    lnK = np.log(trace.capability)
    cv = np.full(times.size, np.nan)
    degenerate = np.zeros(times.size, dtype=bool)
    for k in range(lag, times.size):
        g = (lnK[k] - lnK[k - lag]) / (times[k] - times[k - lag])
        mean = g.mean()
        if abs(mean) < 1e-12:
            degenerate[k] = True
            continue
        cv[k] = g.std() / mean
    return cv, degenerate


def ecosystem_health(trace):
    """Mean orchestration capital relative to its initial level."""
    base = float(trace.mean_orchestration[0])
    if base <= 0:
        raise ValueError("ecosystem_health undefined: initial orchestration is 0")
    return np.asarray(trace.mean_orchestration, dtype=float) / base


# ----------------------------------------------------------------------
# bifurcation detection

@dataclass(frozen=True)
class BifurcationResult:
    threshold: float | None   # None when no bifurcation detected
    jump: float               # largest adjacent HHI jump
    hhi_range: float
    detected: bool


def detect_bifurcation(omegas, final_hhi):
    """Empirical threshold from a sweep: midpoint of the steepest jump.

    ``omegas`` and ``final_hhi`` are parallel sequences (sweep parameter,
    end-of-run concentration).  A sweep whose HHI range stays below 0.2
    is flagged as having no bifurcation.
    """
    om = np.asarray(omegas, dtype=float)
    h = np.asarray(final_hhi, dtype=float)
    if om.size != h.size or om.size < 5:
        raise ValueError("need at least 5 matched sweep points")
    order = np.argsort(om)
    om, h = om[order], h[order]
    rng = float(h.max() - h.min())
    jumps = np.abs(np.diff(h))
    j = int(np.argmax(jumps))
    if rng < 0.2:
        return BifurcationResult(None, float(jumps[j]), rng, False)
    return BifurcationResult(float(0.5 * (om[j] + om[j + 1])),
                             float(jumps[j]), rng, True)


# ----------------------------------------------------------------------
# reading a run directory back

class TraceView:
    """Duck-typed stand-in for SimulationTrace built from run-dir CSVs.

    Exposes the attribute surface the analysis functions consume (times,
    capability, data, quantity, share, mean_price, tokens_served,
    expenditure, hhi, depth, mean_orchestration, ...) without the engine
    in the loop, so `analyze` works on any directory with conforming
    tables.
    """

    def __init__(self, times, frontier, firm_arrays, aggregate_arrays, summary):
        self.times = times
        self.frontier = frontier
        for name, arr in firm_arrays.items():
            setattr(self, name, arr)
        for name, arr in aggregate_arrays.items():
            setattr(self, name, arr)
        self.summary = summary

    @property
    def n_firms(self):
        return self.capability.shape[1]


def load_run(run_dir):
    """Rebuild a TraceView from ``run_dir`` (firms/aggregates CSV + summary)."""
    run_dir = Path(run_dir)
    firms_path = run_dir / "firms.csv"
    agg_path = run_dir / "aggregates.csv"
    summary_path = run_dir / "summary.json"
    for p in (firms_path, agg_path, summary_path):
        if not p.exists():
            raise FileNotFoundError(f"run directory is missing {p.name}: {p}")
    summary = json.loads(summary_path.read_text())
    schema = summary.get("schema_version")
    from .engine import SCHEMA_VERSION
    if schema != SCHEMA_VERSION:
        raise ValueError(
            f"unsupported trace schema {schema!r} (expected {SCHEMA_VERSION!r})")

    firm_rows = _read_csv(firms_path)
    agg_rows = _read_csv(agg_path)

    steps = sorted({int(r["step"]) for r in firm_rows})
    firms = sorted({int(r["firm"]) for r in firm_rows})
    n_rows, n = len(steps), len(firms)
    firm_cols = [c for c in firm_rows[0] if c not in ("step", "time", "firm")]
    firm_arrays = {c: np.full((n_rows, n), np.nan) for c in firm_cols}
    for r in firm_rows:
        k, i = int(r["step"]), int(r["firm"])
        for c in firm_cols:
            firm_arrays[c][k, i] = float(r[c])

    agg_cols = [c for c in agg_rows[0] if c not in ("step", "time")]
    agg_arrays = {c: np.array([float(r[c]) for r in agg_rows]) for c in agg_cols}
    times = np.array([float(r["time"]) for r in agg_rows])
    frontier = agg_arrays.pop("frontier")
    return TraceView(times, frontier, firm_arrays, agg_arrays, summary)


def _read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ValueError(f"{path} has no data rows")
    return rows


def _row_at(trace, time):
    """Index of the first row at or after ``time`` (validated)."""
    k = int(np.searchsorted(trace.times, time - 1e-9))
    if not 0 <= k < trace.times.size:
        raise ValueError(f"time {time} outside trace range "
                         f"[{trace.times[0]}, {trace.times[-1]}]")
    return k
