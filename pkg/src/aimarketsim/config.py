"""Scenario configuration for the two-tier AI industry simulator.

Everything the engine needs to reproduce a run lives in one
:class:`ScenarioConfig`: upstream (foundation-model oligopoly) parameters,
downstream (agent-developer) parameters, frontier growth, solver settings,
and a list of scheduled shocks.  Configs are frozen dataclasses so a run
can never mutate its own inputs; counterfactuals are built with
:func:`with_overrides`.

Calibration notes
-----------------
Defaults are the baseline calibration used throughout the experiment
presets: a four-firm oligopoly with quality sensitivity theta=2.5,
CES complements (rho=-0.2) between compute and data with mildly
increasing returns (gamma=1.3), base churn delta0=0.08/yr and
gap-coupled churn delta2=0.6/yr.  Scale constants (A0, P_Y, wage,
O_init_logmean) were fit by simulation so the symmetric baseline sits
at ~22% capacity utilisation, token prices ~1.5, and capability growth
~9%/yr early on, with the median agent's learning ratio at 40-60% of
its decay rate so no agent crosses the takeoff threshold inside the
default horizon (see scripts/calibrate.py for the search).

Scenario files are TOML or JSON with sections ``frontier``, ``upstream``,
``downstream``, ``sim`` and an optional list ``shocks``; any omitted
field takes its default, unknown keys are rejected loudly.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

try:  # 3.11+
    import tomllib as _toml
except ImportError:  # pragma: no cover - depends on interpreter
    import tomli as _toml

SHOCK_KINDS = (
    "rd_stop",                # target stops investing (invest_rate -> 0), persistent
    "rd_boost",               # target's invest_rate += magnitude, persistent
    "rd_multiplier",          # invest_rate = magnitude * configured rate, t in [time, until)
    "price_override_factor",  # posted token prices *= magnitude, persistent
    "frontier_jump_factor",   # frontier level *= magnitude, once
    "demand_scale_factor",    # downstream token demand *= magnitude, persistent
)

STOCK_DEPRECIATION_MODES = (
    "baseline",  # physical decay at delta0 only
    "gap",       # delta0 + delta2 * max(0, gap - gap_activation)
    "full",      # delta0 + delta1*g_A + delta2*gap (no activation floor)
)


class ConfigError(ValueError):
    """Raised for malformed or inconsistent scenario input."""


def _require(cond, msg):
    if not cond:
        raise ConfigError(msg)


def structural_delta1(theta, N):
    """Competition-structural value of the obsolescence coefficient.

    delta1 = 1 + theta * (1 - 1/N): a share-weighted view of how much of
    the rivals' frontier progress a firm must absorb as value erosion.
    Offered as a helper; presets keep the calibrated delta1 = 1.5 instead.
    """
    _require(N >= 1, "structural_delta1 needs N >= 1")
    return 1.0 + theta * (1.0 - 1.0 / N)


@dataclass(frozen=True)
class FrontierParams:
    """Exogenous research frontier: level A(t) = A0 * exp(g_A * t)."""

    A0: float = 196.825  # scale constant: balanced growth K' = g_A*K at the
                         # baseline reinvestment point (see scripts/calibrate.py)
    g_A: float = 0.10   # frontier growth rate per year

    def __post_init__(self):
        _require(self.A0 > 0, f"frontier.A0 must be > 0, got {self.A0}")
        _require(self.g_A >= 0, f"frontier.g_A must be >= 0, got {self.g_A}")


@dataclass(frozen=True)
class UpstreamParams:
    """Foundation-model firms: production, churn, serving market, flywheel."""

    N: int = 4

    # demand side: multinomial logit over models, s_i ~ K_i^theta * exp(-p_i)
    theta: float = 2.5

    # capability production F = A * (alpha*C^rho + (1-alpha)*D^rho)^(gamma/rho)
    alpha: float = 0.35
    rho_ces: float = -0.2
    gamma_scale: float = 1.3

    # depreciation: economic rate delta0 + delta1*g_A + delta2*max(0, gap)
    delta0: float = 0.08
    delta1: float = 1.5
    delta2: float = 0.6
    # physical stock decay; "gap" mode punishes deficits beyond gap_activation
    stock_depreciation: str = "baseline"
    gap_activation: float = 0.10

    # serving cost c(Q) = c0*Q - kappa*Q_bar*ln(1 - Q/Q_bar), per-firm capacity Q_bar
    c0: float = 0.1
    kappa: float = 0.05
    Q_bar: float = 1.0

    # reinvestment policy: compute purchases C_i = invest_rate * revenue_i
    invest_rate: float = 0.2

    # data flywheel dD/dt = eta*Q - mu_D*D with eta = eta_over_mu * mu_D
    eta_over_mu: float = 1.2
    mu_D: float = 0.2

    # initial conditions (multipliers let presets seed small asymmetries)
    K0: float = 100.0
    D0: float = 0.27
    k0_multipliers: tuple = ()
    d0_multipliers: tuple = ()

    def __post_init__(self):
        _require(self.N >= 2, f"upstream.N must be >= 2, got {self.N}")
        _require(self.theta > 0, f"upstream.theta must be > 0, got {self.theta}")
        _require(0 < self.alpha < 1, f"upstream.alpha must be in (0,1), got {self.alpha}")
        _require(self.rho_ces < 1 and self.rho_ces != 0,
                 f"upstream.rho_ces must be < 1 and nonzero, got {self.rho_ces}")
        _require(self.gamma_scale > 0, f"upstream.gamma_scale must be > 0, got {self.gamma_scale}")
        for name in ("delta0", "delta1", "delta2", "gap_activation", "c0", "eta_over_mu"):
            _require(getattr(self, name) >= 0,
                     f"upstream.{name} must be >= 0, got {getattr(self, name)}")
        _require(self.stock_depreciation in STOCK_DEPRECIATION_MODES,
                 f"upstream.stock_depreciation must be one of {STOCK_DEPRECIATION_MODES}, "
                 f"got {self.stock_depreciation!r}")
        _require(self.kappa > 0, f"upstream.kappa must be > 0, got {self.kappa}")
        _require(self.Q_bar > 0, f"upstream.Q_bar must be > 0, got {self.Q_bar}")
        _require(0 <= self.invest_rate < 1,
                 f"upstream.invest_rate must be in [0,1), got {self.invest_rate}")
        _require(self.mu_D > 0, f"upstream.mu_D must be > 0, got {self.mu_D}")
        _require(self.K0 > 0, f"upstream.K0 must be > 0, got {self.K0}")
        _require(self.D0 > 0, f"upstream.D0 must be > 0, got {self.D0}")
        for name in ("k0_multipliers", "d0_multipliers"):
            mults = getattr(self, name)
            object.__setattr__(self, name, tuple(float(m) for m in mults))
            mults = getattr(self, name)
            if mults:
                _require(len(mults) == self.N,
                         f"upstream.{name} must have N={self.N} entries, "
                         f"got {len(mults)}")
                _require(all(m > 0 for m in mults),
                         f"upstream.{name} entries must be > 0")

    @property
    def eta(self):
        return self.eta_over_mu * self.mu_D

    def initial_capability(self):
        import numpy as np
        mults = self.k0_multipliers or (1.0,) * self.N
        return self.K0 * np.asarray(mults, dtype=float)

    def initial_data(self):
        import numpy as np
        mults = self.d0_multipliers or (1.0,) * self.N
        return self.D0 * np.asarray(mults, dtype=float)


@dataclass(frozen=True)
class DownstreamParams:
    """Agent developers: production tech, architecture costs, entry/exit."""

    M0: int = 50

    # agent production Y = O * (K_eff * h(d))^psi * L^(1-psi)
    psi_K: float = 0.4
    # architecture depth d: efficiency h(d) = 1 + phi_arch * d^nu_arch,
    # tokens per unit output tau(d) = 1 + xi_token * d
    phi_arch: float = 0.5
    nu_arch: float = 0.5
    xi_token: float = 1.8

    # output and labor markets (perfectly elastic).  The wage drifts at
    # wage_growth per year; None means the balanced-growth rate
    # psi/(1-psi) * g_A, which keeps agent labor demand stationary when
    # upstream capability compounds at g_A.  With gamma > 1 upstream, a
    # frozen wage leaves no bounded symmetric path: token demand either
    # ignites super-exponentially or starves, so balanced indexation is
    # the default and experiments override it only to study imbalance.
    P_Y: float = 3.0
    wage: float = 2.0
    wage_growth: float | None = None

    # orchestration capital dO/dt = phi_learn*Y - (mu_O + xi_cann*g_A)*O
    phi_learn: float = 0.05
    mu_O: float = 0.01
    xi_cann: float = 0.2

    # population: lognormal initial O, Poisson entry, exit after a year broke
    O_init_logmean: float = -3.05
    O_init_logsd: float = 0.2
    entry_rate: float = 0.5
    exit_threshold_frac: float = 1e-4
    exit_grace: float = 1.0

    def __post_init__(self):
        _require(self.M0 >= 1, f"downstream.M0 must be >= 1, got {self.M0}")
        _require(0 < self.psi_K < 1, f"downstream.psi_K must be in (0,1), got {self.psi_K}")
        _require(0 < self.nu_arch < 1,
                 f"downstream.nu_arch must be in (0,1), got {self.nu_arch}")
        for name in ("phi_arch", "phi_learn", "mu_O", "xi_cann", "entry_rate",
                     "O_init_logsd"):
            _require(getattr(self, name) >= 0,
                     f"downstream.{name} must be >= 0, got {getattr(self, name)}")
        for name in ("xi_token", "P_Y", "wage", "exit_threshold_frac",
                     "exit_grace"):
            _require(getattr(self, name) > 0,
                     f"downstream.{name} must be > 0, got {getattr(self, name)}")
        if self.wage_growth is not None:
            _require(math.isfinite(self.wage_growth),
                     f"downstream.wage_growth must be finite, got {self.wage_growth}")

    def wage_at(self, t, g_A):
        """Wage at time ``t`` given the upstream frontier growth rate."""
        rate = self.wage_growth
        if rate is None:
            rate = self.psi_K / (1.0 - self.psi_K) * g_A
        return self.wage * math.exp(rate * t)


@dataclass(frozen=True)
class SimParams:
    """Time stepping, seeding and the static-equilibrium solver knobs."""

    dt: float = 0.1
    T: float = 20.0
    seed: int = 0

    fp_damping: float = 0.5     # damped fixed-point step for market clearing
    fp_tol: float = 1e-8
    fp_max_iter: int = 1000
    demand_cap_frac: float = 0.995  # served demand capped below capacity

    def __post_init__(self):
        _require(self.dt > 0, f"sim.dt must be > 0, got {self.dt}")
        _require(self.T > 0, f"sim.T must be > 0, got {self.T}")
        _require(self.T + 1e-12 >= self.dt, "sim.T must cover at least one step")
        _require(0 < self.fp_damping <= 1,
                 f"sim.fp_damping must be in (0,1], got {self.fp_damping}")
        _require(self.fp_tol > 0, f"sim.fp_tol must be > 0, got {self.fp_tol}")
        _require(self.fp_max_iter >= 1,
                 f"sim.fp_max_iter must be >= 1, got {self.fp_max_iter}")
        _require(0 < self.demand_cap_frac < 1,
                 f"sim.demand_cap_frac must be in (0,1), got {self.demand_cap_frac}")

    @property
    def n_steps(self):
        return int(round(self.T / self.dt))


@dataclass(frozen=True)
class ShockSpec:
    """A scheduled intervention, active from ``time`` onward.

    ``rd_boost`` adds ``magnitude`` to the target's reinvestment fraction
    (absolute points by default; set ``relative`` for a proportional
    increase).  ``rd_stop`` zeroes it; ``rd_multiplier`` scales the
    effective rate (applied after any stop/boost).  The ``*_factor``
    kinds multiply posted prices, downstream demand, or the frontier
    level; frontier_jump_factor fires once, everything else persists.
    Giving ``until`` restricts a shock to the window [time, until).
    """

    kind: str
    time: float
    magnitude: float = 1.0
    target: object = "all"   # firm index or "all"
    until: float | None = None  # optional window end; required for rd_multiplier
    relative: bool = False      # rd_boost: magnitude scales the current rate

    def __post_init__(self):
        _require(self.kind in SHOCK_KINDS,
                 f"shock.kind must be one of {SHOCK_KINDS}, got {self.kind!r}")
        _require(self.time >= 0, f"shock.time must be >= 0, got {self.time}")
        if self.target != "all":
            _require(isinstance(self.target, int) and not isinstance(self.target, bool),
                     f"shock.target must be 'all' or a firm index, got {self.target!r}")
            _require(self.target >= 0, f"shock.target must be >= 0, got {self.target}")
        if self.kind == "rd_multiplier":
            _require(self.until is not None,
                     "rd_multiplier shocks need an explicit until > time")
        if self.kind == "frontier_jump_factor":
            _require(self.until is None,
                     "frontier_jump_factor is instantaneous; until does not apply")
        if self.until is not None:
            _require(self.until > self.time,
                     f"shock.until must exceed time, got [{self.time}, {self.until})")
        _require(not self.relative or self.kind == "rd_boost",
                 "shock.relative only applies to rd_boost")
        if self.kind in ("rd_multiplier", "price_override_factor", "frontier_jump_factor"):
            _require(self.magnitude > 0,
                     f"{self.kind} magnitude must be > 0, got {self.magnitude}")
        if self.kind in ("rd_boost", "demand_scale_factor"):
            _require(self.magnitude >= 0,
                     f"{self.kind} magnitude must be >= 0, got {self.magnitude}")


@dataclass(frozen=True)
class ScenarioConfig:
    """Complete, self-contained description of one simulation run."""

    frontier: FrontierParams = field(default_factory=FrontierParams)
    upstream: UpstreamParams = field(default_factory=UpstreamParams)
    downstream: DownstreamParams = field(default_factory=DownstreamParams)
    sim: SimParams = field(default_factory=SimParams)
    shocks: tuple = ()

    def __post_init__(self):
        shocks = tuple(
            s if isinstance(s, ShockSpec) else _shock_from_dict(s) for s in self.shocks
        )
        object.__setattr__(self, "shocks", shocks)
        for s in shocks:
            _require(s.time <= self.sim.T + 1e-9,
                     f"shock at t={s.time} is past the T {self.sim.T}")
            if s.target != "all":
                _require(s.target < self.upstream.N,
                         f"shock.target {s.target} out of range for "
                         f"N={self.upstream.N}")

    def to_dict(self):
        return dataclasses.asdict(self)

    def dumps(self, indent=None):
        return json.dumps(self.to_dict(), indent=indent, sort_keys=True)

    def config_hash(self):
        """Short stable digest of the full configuration."""
        return hashlib.sha256(self.dumps().encode()).hexdigest()[:12]

    @classmethod
    def from_dict(cls, data):
        _require(isinstance(data, dict), f"scenario must be a table, got {type(data).__name__}")
        known = {"frontier": FrontierParams, "upstream": UpstreamParams,
                 "downstream": DownstreamParams, "sim": SimParams}
        for key in data:
            if key not in known and key != "shocks":
                raise ConfigError(f"unknown top-level section {key!r} "
                                  f"(expected {sorted(known) + ['shocks']})")
        kwargs = {}
        for section, klass in known.items():
            sub = data.get(section, {})
            _require(isinstance(sub, dict), f"section {section!r} must be a table")
            kwargs[section] = _section_from_dict(klass, section, sub)
        raw_shocks = data.get("shocks", [])
        _require(isinstance(raw_shocks, (list, tuple)),
                 "shocks must be an array of tables")
        kwargs["shocks"] = tuple(_shock_from_dict(s) for s in raw_shocks)
        return cls(**kwargs)


def _section_from_dict(klass, section, sub):
    names = {f.name for f in dataclasses.fields(klass)}
    for key in sub:
        if key not in names:
            raise ConfigError(f"unknown key {key!r} in section {section!r} "
                              f"(known keys: {sorted(names)})")
    coerced = {}
    for key, val in sub.items():
        if isinstance(val, list):
            val = tuple(val)
        coerced[key] = val
    return klass(**coerced)


def _shock_from_dict(data):
    if isinstance(data, ShockSpec):
        return data
    _require(isinstance(data, dict), "each shock must be a table")
    names = {f.name for f in dataclasses.fields(ShockSpec)}
    for key in data:
        if key not in names:
            raise ConfigError(f"unknown key {key!r} in shock (known keys: {sorted(names)})")
    return ShockSpec(**data)


def load_scenario(path):
    """Read, parse and validate a TOML or JSON scenario file."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"scenario file not found: {path}")
    suffix = path.suffix.lower()
    if suffix == ".toml":
        try:
            with open(path, "rb") as fh:
                data = _toml.load(fh)
        except _toml.TOMLDecodeError as exc:
            raise ConfigError(f"invalid TOML in {path}: {exc}") from exc
    elif suffix == ".json":
        try:
            data = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(
                f"invalid JSON in {path} at line {exc.lineno}, col {exc.colno}: {exc.msg}"
            ) from exc
    else:
        raise ConfigError(f"unsupported scenario format {suffix!r} (use .toml or .json)")
    try:
        return ScenarioConfig.from_dict(data)
    except ConfigError:
        raise
    except TypeError as exc:
        raise ConfigError(f"malformed scenario {path}: {exc}") from exc


def with_overrides(config, overrides):
    """Return a copy of ``config`` with dotted-key overrides applied.

    >>> cfg2 = with_overrides(cfg, {"upstream.eta_over_mu": 2.0, "sim.seed": 7})

    Shocks can be replaced wholesale via the key ``"shocks"``.
    """
    data = config.to_dict()
    for key, value in overrides.items():
        if key == "shocks":
            data["shocks"] = [
                dataclasses.asdict(s) if isinstance(s, ShockSpec) else dict(s)
                for s in value
            ]
            continue
        parts = key.split(".")
        _require(len(parts) == 2, f"override key must be 'section.field', got {key!r}")
        section, name = parts
        _require(section in data, f"unknown section {section!r} in override {key!r}")
        _require(name in data[section], f"unknown field {name!r} in override {key!r}")
        data[section][name] = value
    return ScenarioConfig.from_dict(data)
