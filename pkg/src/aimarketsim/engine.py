"""Couples the market, production, and downstream laws into a timed run.

Each step of length ``dt`` executes one period of the economy, in a fixed
order chosen so that every block consumes only already-determined values:

1. scheduled shocks become active (investment overrides, price/demand
   factors, frontier jumps);
2. downstream agents pick architecture depth and output plans at the
   *previous* step's average token price (one-step information lag, which
   breaks the circularity between architecture choice and market
   clearing without a nested fixed point);
3. the upstream serving market clears as a static equilibrium for
   today's capability stocks and the planned token demand;
4. revenues fund compute purchases, CES production runs, and the
   capability/data/orchestration stocks take one forward-Euler step,
   while the research frontier advances by its exact exponential map.

State is recorded *before* it is advanced, so row ``k`` of the trace
describes the economy at time ``k*dt`` together with the flows computed
during that period.  After the final step the terminal state gets one
extra evaluation row (no further update), so a horizon-T run yields
``T/dt`` executed steps and ``T/dt + 1`` trace rows ending exactly at T.

Everything is deterministic: the only randomness is the downstream
orchestration-capital draws, taken from a generator seeded by the
scenario seed, and consumed in a fixed order.
"""

from __future__ import annotations

import json
import platform
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import ScenarioConfig
from .market import allocate_demand, default_prices, solve_static_equilibrium
from .upstream import gross_production, marginal_product_compute, step_frontier
from .downstream import (
    aggregate_token_demand,
    optimal_architecture,
    step_orchestration,
    token_multiplier,
)
from .valuation import (
    competitive_gaps,
    depreciation_rate,
    shadow_value_index,
    stock_decay_rate,
)

SCHEMA_VERSION = "aimarketsim.run/1"

# Euler overshoot can push a stock through zero when decay*dt is large;
# capability is floored just above it so logit utilities stay defined.
K_FLOOR = 1e-12

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

DOWNSTREAM_COLUMNS = (
    "step", "time", "agents_alive", "agents_entered", "agents_exited",
    "mean_orchestration", "total_orchestration", "depth", "labor",
    "output", "profit", "tokens_demanded", "viable",
)


class NumericalError(RuntimeError):
    """A run halted mid-horizon (solver non-convergence or bad state).

    Carries the partial trace recorded up to the failing step, so the
    path into the failure can be inspected.
    """

    def __init__(self, message, trace=None, step=None):
        super().__init__(message)
        self.trace = trace
        self.step = step


class _StepFailure(Exception):
    def __init__(self, step, message):
        super().__init__(message)
        self.step = step


def _fmt(value):
    """One CSV cell: integers verbatim, floats at 17 significant digits."""
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), ".17g")


@dataclass(frozen=True)
class SimulationTrace:
    """Complete record of one run; one row per step plus the terminal row.

    Per-firm arrays have shape (rows, n_firms); aggregate series have
    shape (rows,).  A failed run carries the rows recorded before the
    failure and sets ``failed`` plus the failing step and message.
    """

    config: ScenarioConfig
    seed: int
    config_hash: str

    times: np.ndarray
    frontier: np.ndarray

    capability: np.ndarray
    data: np.ndarray
    price: np.ndarray
    share: np.ndarray
    quantity: np.ndarray
    revenue: np.ndarray
    investment: np.ndarray
    production: np.ndarray
    gap: np.ndarray
    delta_econ: np.ndarray
    delta_stock: np.ndarray
    shadow_value: np.ndarray
    innovation_tax: np.ndarray

    token_demand: np.ndarray
    tokens_served: np.ndarray
    expenditure: np.ndarray
    mean_price: np.ndarray
    hhi: np.ndarray
    solver_iterations: np.ndarray
    solver_residual: np.ndarray
    depth: np.ndarray
    agents_alive: np.ndarray
    agents_entered: np.ndarray
    agents_exited: np.ndarray
    mean_orchestration: np.ndarray
    total_orchestration: np.ndarray
    downstream_labor: np.ndarray
    downstream_output: np.ndarray
    downstream_profit: np.ndarray
    downstream_viable: np.ndarray

    saturation_events: tuple = ()
    failed: bool = False
    failure_step: int | None = None
    failure_message: str | None = None

    @property
    def n_rows(self):
        return self.times.size

    @property
    def n_steps(self):
        """Steps actually executed (a complete run records n_steps + 1 rows)."""
        return self.times.size if self.failed else self.times.size - 1

    @property
    def n_firms(self):
        return self.capability.shape[1]

    def growth_rates(self):
        """Per-firm annualised log-capability growth over the whole trace."""
        span = self.times[-1] - self.times[0]
        if span <= 0:
            raise ValueError("trace too short for a growth rate")
        return np.log(self.capability[-1] / self.capability[0]) / span

    # ------------------------------------------------------------------
    # serialization

    def write_firm_csv(self, path):
        with open(path, "w") as fh:
            fh.write(",".join(FIRM_COLUMNS) + "\n")
            for k in range(self.n_rows):
                for i in range(self.n_firms):
                    row = (
                        k, self.times[k], i,
                        self.capability[k, i], self.data[k, i],
                        self.price[k, i], self.share[k, i],
                        self.quantity[k, i], self.revenue[k, i],
                        self.investment[k, i], self.production[k, i],
                        self.gap[k, i], self.delta_econ[k, i],
                        self.delta_stock[k, i], self.shadow_value[k, i],
                        self.innovation_tax[k, i],
                    )
                    fh.write(",".join(_fmt(v) for v in row) + "\n")

    def write_aggregate_csv(self, path):
        with open(path, "w") as fh:
            fh.write(",".join(AGGREGATE_COLUMNS) + "\n")
            for k in range(self.n_rows):
                row = (
                    k, self.times[k], self.frontier[k],
                    self.token_demand[k], self.tokens_served[k],
                    self.expenditure[k], self.mean_price[k], self.hhi[k],
                    self.solver_iterations[k], self.solver_residual[k],
                    self.depth[k], self.agents_alive[k],
                    self.downstream_output[k], self.downstream_profit[k],
                    self.mean_orchestration[k],
                )
                fh.write(",".join(_fmt(v) for v in row) + "\n")

    def write_downstream_csv(self, path):
        with open(path, "w") as fh:
            fh.write(",".join(DOWNSTREAM_COLUMNS) + "\n")
            for k in range(self.n_rows):
                row = (
                    k, self.times[k], self.agents_alive[k],
                    self.agents_entered[k], self.agents_exited[k],
                    self.mean_orchestration[k], self.total_orchestration[k],
                    self.depth[k], self.downstream_labor[k],
                    self.downstream_output[k], self.downstream_profit[k],
                    self.token_demand[k], self.downstream_viable[k],
                )
                fh.write(",".join(_fmt(v) for v in row) + "\n")

    def summary_dict(self):
        try:
            from importlib.metadata import version

            pkg_version = version("aimarketsim")
        except Exception:  # pragma: no cover - not installed
            pkg_version = "unknown"
        out = {
            "schema_version": SCHEMA_VERSION,
            "package_version": pkg_version,
            "numpy_version": np.__version__,
            "python_version": platform.python_version(),
            "seed": self.seed,
            "config_hash": self.config_hash,
            "dt": self.config.sim.dt,
            "horizon": self.config.sim.T,
            "n_steps": int(self.n_steps),
            "n_firms": int(self.n_firms),
            "failed": bool(self.failed),
            "failure_step": self.failure_step,
            "failure_message": self.failure_message,
            "saturation_events": [dict(e) for e in self.saturation_events],
        }
        if self.n_rows:
            last = -1
            metrics = {
                "hhi_initial": float(self.hhi[0]),
                "hhi_final": float(self.hhi[last]),
                "share_max_final": float(self.share[last].max()),
                "capability_final": [float(x) for x in self.capability[last]],
                "frontier_final": float(self.frontier[last]),
                "mean_price_initial": float(self.mean_price[0]),
                "mean_price_final": float(self.mean_price[last]),
                "tokens_served_final": float(self.tokens_served[last]),
                "expenditure_final": float(self.expenditure[last]),
                "depth_initial": float(self.depth[0]),
                "depth_final": float(self.depth[last]),
                "agents_alive_final": int(self.agents_alive[last]),
                "downstream_output_final": float(self.downstream_output[last]),
                "mean_orchestration_final": float(self.mean_orchestration[last]),
                "solver_iterations_max": int(self.solver_iterations.max()),
            }
            if self.n_rows >= 2 and not self.failed:
                metrics["mean_growth_rate"] = float(self.growth_rates().mean())
            out["metrics"] = metrics
        else:
            out["metrics"] = {}
        return out

    def write_run_dir(self, out_dir):
        """Write the documented four-file run layout; returns the paths."""
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = {
            "firms": out / "firms.csv",
            "aggregates": out / "aggregates.csv",
            "downstream": out / "downstream.csv",
            "summary": out / "summary.json",
            "scenario": out / "scenario.json",
        }
        self.write_firm_csv(paths["firms"])
        self.write_aggregate_csv(paths["aggregates"])
        self.write_downstream_csv(paths["downstream"])
        with open(paths["summary"], "w") as fh:
            json.dump(self.summary_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")
        with open(paths["scenario"], "w") as fh:
            fh.write(self.config.dumps(indent=2))
            fh.write("\n")
        return paths

    def validate(self):
        """Internal-consistency checks; raises AssertionError on violation."""
        dt = self.config.sim.dt
        assert np.all(np.diff(self.times) > 0), "time must strictly increase"
        assert np.allclose(np.diff(self.times), dt, atol=1e-9), "time step must be dt"
        sums = self.share.sum(axis=1)
        assert np.all(np.abs(sums - 1.0) < 1e-10), "shares must sum to 1"
        spend = (self.price * self.quantity).sum(axis=1)
        assert np.all(np.abs(spend - self.expenditure) <= 1e-9 * np.maximum(1.0, spend)), \
            "expenditure must equal sum of price*quantity"


@dataclass
class _StepEval:
    """Everything computed during one period, before the state advances."""

    policy: np.ndarray
    posted: np.ndarray
    shares: np.ndarray
    quantities: np.ndarray
    revenue: np.ndarray
    investment: np.ndarray
    production: np.ndarray
    gaps: np.ndarray
    delta_econ: np.ndarray
    delta_stock: np.ndarray
    shadow: np.ndarray
    innovation_tax: np.ndarray
    iterations: int
    residual: float
    token_demand: float
    depth: float
    viable: bool
    agent_output: np.ndarray     # realised, per alive agent
    agent_labor: np.ndarray
    agent_profit: np.ndarray


class Simulation:
    """One scenario run.  Construct, then call :meth:`run` once."""

    def __init__(self, config: ScenarioConfig):
        self.config = config
        up, dp, sim = config.upstream, config.downstream, config.sim
        self.up, self.dp, self.sim = up, dp, sim
        self.g_A = config.frontier.g_A
        self.dt = sim.dt
        self.n_steps = sim.n_steps
        self.n_firms = up.N

        # state
        self.K = up.initial_capability()
        self.D = up.initial_data()
        self.A = config.frontier.A0
        self.rng = np.random.default_rng(np.random.SeedSequence(sim.seed))
        self.O = self.rng.lognormal(dp.O_init_logmean, dp.O_init_logsd, dp.M0)
        self.alive = np.ones(dp.M0, dtype=bool)
        self.below_since = np.full(dp.M0, np.nan)
        self.entered = 0
        self.exited = 0

        # one-step information lag: downstream plans against these
        self.p_posted_prev = default_prices(self.n_firms, up)
        self.s_prev = np.full(self.n_firms, 1.0 / self.n_firms)
        self.p_warm = None          # solver warm start (unscaled prices)
        self._q_norm = None         # t=0 shadow-value normalisation
        self.saturation_events = []

        # shock schedule in step units
        self._shock_steps = []
        for s in config.shocks:
            start = int(round(s.time / self.dt))
            end = int(round(s.until / self.dt)) if s.until is not None else None
            self._shock_steps.append((s, start, end))

        rows = self.n_steps + 1
        n = self.n_firms
        self._times = np.zeros(rows)
        self._frontier = np.zeros(rows)
        firm_arrays = {}
        for name in ("capability", "data", "price", "share", "quantity",
                     "revenue", "investment", "production", "gap",
                     "delta_econ", "delta_stock", "shadow_value",
                     "innovation_tax"):
            firm_arrays[name] = np.zeros((rows, n))
        self._firm = firm_arrays
        agg_arrays = {}
        for name in ("token_demand", "tokens_served", "expenditure",
                     "mean_price", "hhi", "solver_residual", "depth",
                     "mean_orchestration", "total_orchestration",
                     "downstream_labor", "downstream_output",
                     "downstream_profit"):
            agg_arrays[name] = np.zeros(rows)
        self._agg = agg_arrays
        self._solver_iterations = np.zeros(rows, dtype=np.int64)
        self._agents_alive = np.zeros(rows, dtype=np.int64)
        self._agents_entered = np.zeros(rows, dtype=np.int64)
        self._agents_exited = np.zeros(rows, dtype=np.int64)
        self._viable = np.zeros(rows, dtype=bool)
        self._rows_recorded = 0

    # ------------------------------------------------------------------
    # shock overlays

    def _targets(self, shock):
        return slice(None) if shock.target == "all" else shock.target

    def _active(self, start, end, k):
        return start <= k and (end is None or k < end)

    def _effective_policy(self, k):
        """Per-firm reinvestment rates after active shocks (stop → boost → scale)."""
        policy = np.full(self.n_firms, self.up.invest_rate)
        for s, start, end in self._shock_steps:
            if s.kind == "rd_stop" and self._active(start, end, k):
                policy[self._targets(s)] = 0.0
        for s, start, end in self._shock_steps:
            if s.kind == "rd_boost" and self._active(start, end, k):
                if s.relative:
                    policy[self._targets(s)] *= 1.0 + s.magnitude
                else:
                    policy[self._targets(s)] += s.magnitude
        for s, start, end in self._shock_steps:
            if s.kind == "rd_multiplier" and self._active(start, end, k):
                policy[self._targets(s)] *= s.magnitude
        return np.clip(policy, 0.0, None)

    def _factor(self, kind, k):
        out = 1.0
        for s, start, end in self._shock_steps:
            if s.kind == kind and self._active(start, end, k):
                out *= s.magnitude
        return out

    def _jump_factor(self, k):
        out = 1.0
        for s, start, _ in self._shock_steps:
            if s.kind == "frontier_jump_factor" and start == k:
                out *= s.magnitude
        return out

    # ------------------------------------------------------------------
    # one period

    def _evaluate(self, k):
        up, dp, sim = self.up, self.dp, self.sim

        jump = self._jump_factor(k)
        if jump != 1.0:
            self.A *= jump
        policy = self._effective_policy(k)
        demand_scale = self._factor("demand_scale_factor", k)
        price_factor = self._factor("price_override_factor", k)

        # downstream plans at last-step information
        p_plan = float(np.dot(self.s_prev, self.p_posted_prev))
        K_eff = float(np.dot(self.s_prev, self.K))
        O_alive = self.O[self.alive]
        wage_t = dp.wage_at(k * self.dt, self.g_A)
        arch = optimal_architecture(p_plan, K_eff, O_alive, dp, wage=wage_t)
        # a demand contraction rations realised sales below the plan;
        # labor was already hired, so margins compress
        out_real = arch.output * demand_scale
        margin = dp.P_Y - p_plan * token_multiplier(arch.depth, dp)
        profit_real = margin * out_real - wage_t * arch.labor
        token_demand = aggregate_token_demand(out_real, arch.depth, dp)

        eq = solve_static_equilibrium(self.K, token_demand, up, sim,
                                      p_init=self.p_warm)
        if not eq.converged:
            raise _StepFailure(
                k, f"market solver failed to converge at step {k} "
                   f"(t={k * self.dt:g}, residual={eq.residual:.3e})")
        self.p_warm = eq.prices
        if price_factor != 1.0:
            posted = eq.prices * price_factor
            shares, quantities = allocate_demand(self.K, posted, token_demand,
                                                 up, sim)
        else:
            posted, shares, quantities = eq.prices, eq.shares, eq.quantities

        revenue = posted * quantities
        investment = policy * revenue
        production = gross_production(self.A, investment, self.D, up)
        gaps = competitive_gaps(self.K)
        delta_econ = depreciation_rate(gaps, self.g_A, up)
        delta_stock = stock_decay_rate(gaps, self.g_A, up)

        q_raw = shadow_value_index(shares, self.K, up.theta)
        if self._q_norm is None:
            mean_q = float(q_raw.mean())
            self._q_norm = mean_q if mean_q > 0 else 1.0
        shadow = q_raw / self._q_norm

        # intensity required to hold K level: delta / (dF/dC * revenue / K)
        mrd = marginal_product_compute(self.A, investment, self.D, up)
        with np.errstate(divide="ignore", invalid="ignore"):
            per_unit = mrd * revenue / self.K
            tax = np.where(per_unit > 0, delta_econ / per_unit, np.nan)

        return _StepEval(
            policy=policy, posted=posted, shares=shares, quantities=quantities,
            revenue=revenue, investment=investment, production=production,
            gaps=gaps, delta_econ=delta_econ, delta_stock=delta_stock,
            shadow=shadow, innovation_tax=tax, iterations=eq.iterations,
            residual=eq.residual, token_demand=token_demand,
            depth=arch.depth, viable=arch.viable, agent_output=out_real,
            agent_labor=arch.labor, agent_profit=profit_real,
        )

    def _record(self, k, ev):
        self._times[k] = k * self.dt
        self._frontier[k] = self.A
        f = self._firm
        f["capability"][k] = self.K
        f["data"][k] = self.D
        f["price"][k] = ev.posted
        f["share"][k] = ev.shares
        f["quantity"][k] = ev.quantities
        f["revenue"][k] = ev.revenue
        f["investment"][k] = ev.investment
        f["production"][k] = ev.production
        f["gap"][k] = ev.gaps
        f["delta_econ"][k] = ev.delta_econ
        f["delta_stock"][k] = ev.delta_stock
        f["shadow_value"][k] = ev.shadow
        f["innovation_tax"][k] = ev.innovation_tax
        a = self._agg
        a["token_demand"][k] = ev.token_demand
        a["tokens_served"][k] = ev.quantities.sum()
        a["expenditure"][k] = ev.revenue.sum()
        a["mean_price"][k] = float(np.dot(ev.shares, ev.posted))
        a["hhi"][k] = float(np.sum(ev.shares ** 2))
        a["solver_residual"][k] = ev.residual
        a["depth"][k] = ev.depth
        alive = self.alive
        a["mean_orchestration"][k] = float(self.O[alive].mean()) if alive.any() else 0.0
        a["total_orchestration"][k] = float(self.O[alive].sum())
        a["downstream_labor"][k] = float(ev.agent_labor.sum())
        a["downstream_output"][k] = float(ev.agent_output.sum())
        a["downstream_profit"][k] = float(ev.agent_profit.sum())
        self._solver_iterations[k] = ev.iterations
        self._agents_alive[k] = int(alive.sum())
        self._agents_entered[k] = self.entered
        self._agents_exited[k] = self.exited
        self._viable[k] = ev.viable
        self._rows_recorded = k + 1

    def _advance(self, k, ev):
        up, dp = self.up, self.dp
        dt = self.dt
        t_next = (k + 1) * dt

        K_next = self.K + dt * (ev.production - ev.delta_stock * self.K)
        floored = K_next < K_FLOOR
        for i in np.nonzero(floored)[0]:
            self.saturation_events.append(
                {"step": k, "time": k * dt, "event": "capability_floor",
                 "index": int(i)})
        self.K = np.where(floored, K_FLOOR, K_next)

        # data flywheel (same law as upstream.step_data, with floor bookkeeping)
        D_raw = self.D + dt * (up.eta * ev.quantities - up.mu_D * self.D)
        for i in np.nonzero(D_raw < 0.0)[0]:
            self.saturation_events.append(
                {"step": k, "time": k * dt, "event": "data_floor",
                 "index": int(i)})
        self.D = np.maximum(D_raw, 0.0)

        # downstream stocks, exit, entry
        alive_idx = np.nonzero(self.alive)[0]
        if alive_idx.size:
            self.O[alive_idx] = step_orchestration(
                self.O[alive_idx], ev.agent_output, self.g_A, dp, dt)
        threshold = dp.exit_threshold_frac * np.exp(dp.O_init_logmean)
        below = self.alive & (self.O < threshold)
        fresh = below & np.isnan(self.below_since)
        self.below_since[fresh] = t_next
        self.below_since[~below] = np.nan
        expired = below & (t_next - self.below_since >= dp.exit_grace - 1e-9)
        n_exit = int(expired.sum())
        if n_exit:
            self.alive[expired] = False
            self.exited += n_exit
        n_new = int(self.rng.poisson(dp.entry_rate * dt)) if dp.entry_rate > 0 else 0
        if n_new:
            O_new = self.rng.lognormal(dp.O_init_logmean, dp.O_init_logsd, n_new)
            self.O = np.concatenate([self.O, O_new])
            self.alive = np.concatenate([self.alive, np.ones(n_new, dtype=bool)])
            self.below_since = np.concatenate([self.below_since,
                                               np.full(n_new, np.nan)])
            self.entered += n_new

        self.A = step_frontier(self.A, self.g_A, dt)
        self.s_prev = ev.shares
        self.p_posted_prev = ev.posted

        state_ok = (np.all(np.isfinite(self.K)) and np.all(np.isfinite(self.D))
                    and np.isfinite(self.A) and np.all(np.isfinite(self.O)))
        if not state_ok:
            raise _StepFailure(
                k, f"non-finite state after step {k} (t={k * dt:g})")

    # ------------------------------------------------------------------

    def _build_trace(self, rows, failed, failure_step=None, failure_message=None):
        f, a = self._firm, self._agg
        return SimulationTrace(
            config=self.config, seed=self.sim.seed,
            config_hash=self.config.config_hash(),
            times=self._times[:rows], frontier=self._frontier[:rows],
            capability=f["capability"][:rows], data=f["data"][:rows],
            price=f["price"][:rows], share=f["share"][:rows],
            quantity=f["quantity"][:rows], revenue=f["revenue"][:rows],
            investment=f["investment"][:rows], production=f["production"][:rows],
            gap=f["gap"][:rows], delta_econ=f["delta_econ"][:rows],
            delta_stock=f["delta_stock"][:rows],
            shadow_value=f["shadow_value"][:rows],
            innovation_tax=f["innovation_tax"][:rows],
            token_demand=a["token_demand"][:rows],
            tokens_served=a["tokens_served"][:rows],
            expenditure=a["expenditure"][:rows],
            mean_price=a["mean_price"][:rows], hhi=a["hhi"][:rows],
            solver_iterations=self._solver_iterations[:rows],
            solver_residual=a["solver_residual"][:rows],
            depth=a["depth"][:rows], agents_alive=self._agents_alive[:rows],
            agents_entered=self._agents_entered[:rows],
            agents_exited=self._agents_exited[:rows],
            mean_orchestration=a["mean_orchestration"][:rows],
            total_orchestration=a["total_orchestration"][:rows],
            downstream_labor=a["downstream_labor"][:rows],
            downstream_output=a["downstream_output"][:rows],
            downstream_profit=a["downstream_profit"][:rows],
            downstream_viable=self._viable[:rows],
            saturation_events=tuple(self.saturation_events),
            failed=failed, failure_step=failure_step,
            failure_message=failure_message,
        )

    def run(self):
        """Integrate the full horizon; returns the trace.

        Raises :class:`NumericalError` (with the partial trace attached)
        if the market solver fails or the state leaves the finite domain.
        """
        k = 0
        try:
            for k in range(self.n_steps):
                ev = self._evaluate(k)
                self._record(k, ev)
                self._advance(k, ev)
            k = self.n_steps
            ev = self._evaluate(k)          # terminal evaluation row at t = T
            self._record(k, ev)
        except _StepFailure as exc:
            trace = self._build_trace(rows=self._rows_recorded, failed=True,
                                      failure_step=exc.step,
                                      failure_message=str(exc))
            raise NumericalError(str(exc), trace=trace, step=exc.step) from None
        except (ValueError, FloatingPointError, OverflowError) as exc:
            message = f"numerical failure at step {k} (t={k * self.dt:g}): {exc}"
            trace = self._build_trace(rows=self._rows_recorded, failed=True,
                                      failure_step=k, failure_message=message)
            raise NumericalError(message, trace=trace, step=k) from exc
        return self._build_trace(rows=self.n_steps + 1, failed=False)


def run(config: ScenarioConfig) -> SimulationTrace:
    """Run one scenario end to end; deterministic for a fixed config."""
    return Simulation(config).run()
