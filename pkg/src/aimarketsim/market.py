"""Static token-serving market: logit demand, congestion costs, pricing.

Each period the installed capability stocks K and total downstream token
demand are given, and the serving market clears as a static equilibrium:

* demand splits across firms by multinomial logit with systematic
  utility theta*ln(K_i) - p_i (quality-adjusted, price-sensitive);
* each firm posts price = marginal serving cost + the standard logit
  markup 1/(1 - s_i);
* marginal cost c0 + kappa/(1 - Q_i/Q_bar) rises steeply as a firm's
  served volume approaches its capacity Q_bar.

Because shares depend on prices and prices on shares, the equilibrium
is found by a damped fixed-point iteration whose per-firm step shrinks
with the firm's share (lopsided markets make the markup map steep; see
solve_static_equilibrium).  Any firm whose allocation would breach
demand_cap_frac * Q_bar serves exactly that much and rations the rest,
which keeps its congestion term finite.  Rationing is per firm: tying
everyone's volume to the most congested firm would make each firm's
marginal cost jump whenever the identity of the largest share changes,
and the over-capacity market then has no equilibrium to find.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# markup guard: transient iterates can push a share to 1.0 in floating
# point when capability gaps are extreme; the fixed point itself is
# interior, so a hard cap on 1/(1-s) only affects intermediate steps
_MARKUP_SHARE_CAP = 1.0 - 1e-9

# damped fixed-point iterations before handing over to Newton
_NEWTON_AFTER = 300


@dataclass(frozen=True)
class MarketEquilibrium:
    """Solved serving-market state for one period."""

    prices: np.ndarray
    shares: np.ndarray
    quantities: np.ndarray
    iterations: int
    residual: float     # final max |price update|; < fp_tol when converged
    converged: bool

    @property
    def total_served(self):
        return float(np.sum(self.quantities))

    @property
    def mean_price(self):
        """Share-weighted average price actually paid per token."""
        return float(np.dot(self.shares, self.prices))


def logit_shares(K, prices, theta):
    """Multinomial-logit demand shares for capabilities K at posted prices.

    Computed in log space with max-subtraction, so arbitrarily lopsided
    capability ratios or prices cannot overflow.  Shares sum to one
    exactly up to float rounding.
    """
    K = np.asarray(K, dtype=float)
    prices = np.asarray(prices, dtype=float)
    if K.ndim != 1 or K.size == 0:
        raise ValueError("K must be a nonempty 1-D array")
    if K.shape != prices.shape:
        raise ValueError(f"K and prices must align, got {K.shape} vs {prices.shape}")
    if np.any(K <= 0) or not np.all(np.isfinite(K)):
        raise ValueError("capabilities must be positive and finite")
    if not np.all(np.isfinite(prices)):
        raise ValueError("prices must be finite")
    util = theta * np.log(K) - prices
    util -= util.max()
    weights = np.exp(util)
    return weights / weights.sum()


def ops_cost(Q, params):
    """Total serving cost c0*Q - kappa*Q_bar*ln(1 - Q/Q_bar) at volume Q."""
    Q = np.asarray(Q, dtype=float)
    if np.any(Q < 0):
        raise ValueError("served volume must be >= 0")
    if np.any(Q >= params.Q_bar):
        raise ValueError(f"served volume must stay below capacity Q_bar={params.Q_bar}")
    out = params.c0 * Q - params.kappa * params.Q_bar * np.log1p(-Q / params.Q_bar)
    return float(out) if out.ndim == 0 else out


def marginal_ops_cost(Q, params):
    """d(ops_cost)/dQ = c0 + kappa/(1 - Q/Q_bar)."""
    Q = np.asarray(Q, dtype=float)
    if np.any(Q < 0) or np.any(Q >= params.Q_bar):
        raise ValueError(f"volume must lie in [0, Q_bar={params.Q_bar})")
    out = params.c0 + params.kappa / (1.0 - Q / params.Q_bar)
    return float(out) if out.ndim == 0 else out


def pricing_rule(shares, Q, params):
    """Posted prices: marginal serving cost plus the logit markup 1/(1-s)."""
    shares = np.asarray(shares, dtype=float)
    Q = np.asarray(Q, dtype=float)
    if np.any(shares < 0) or np.any(shares > 1):
        raise ValueError("shares must lie in [0, 1]")
    markup = 1.0 / (1.0 - np.minimum(shares, _MARKUP_SHARE_CAP))
    return marginal_ops_cost(Q, params) + markup


def default_prices(n_firms, params):
    """Symmetric zero-demand equilibrium prices, used as a cold start."""
    s = 1.0 / n_firms
    return np.full(n_firms, params.c0 + params.kappa + 1.0 / (1.0 - s))


def allocate_demand(K, prices, demand_total, params, sim):
    """Split total demand across firms at the given posted prices.

    Returns (shares, quantities).  Each quantity saturates at
    ``demand_cap_frac * Q_bar`` — the same rationing rule the equilibrium
    solver applies, exposed separately so a price override can re-clear
    the market at non-equilibrium prices.

    The saturation is a softmin rather than a hard clip.  With inelastic
    within-step demand the equilibrium of a congested market can sit
    exactly on the clip corner, where the fixed-point iteration chatters
    between the pinned and unpinned branches and never meets a 1e-8
    tolerance.  The rounding width is a quarter of the capacity headroom
    (1 - demand_cap_frac), so allocations more than ~1% below the wall
    are unchanged to machine precision.
    """
    shares = logit_shares(K, prices, params.theta)
    cap = sim.demand_cap_frac * params.Q_bar
    beta = 4.0 / ((1.0 - sim.demand_cap_frac) * params.Q_bar)
    raw = shares * demand_total
    Q = cap - np.logaddexp(0.0, -beta * (raw - cap)) / beta
    return shares, Q


def _pricing_residual(p, K, demand_total, params, sim):
    """Fixed-point residual mc(Q(p)) + markup(s(p)) - p and its pieces."""
    shares, Q = allocate_demand(K, p, demand_total, params, sim)
    return pricing_rule(shares, Q, params) - p, shares, Q


def _pricing_jacobian(p, shares, Q, demand_total, params, sim):
    """Analytic Jacobian of the pricing residual with respect to prices.

    Three smooth pieces chain together: the logit share response
    ds_i/dp_j = s_i (s_j - 1[i=j]), the softmin saturation slope of
    served volume, and the congestion marginal-cost slope.  The markup
    derivative switches off above the share cap, matching the min() in
    pricing_rule.
    """
    n = p.size
    ds = shares[:, None] * (shares[None, :] - np.eye(n))
    cap = sim.demand_cap_frac * params.Q_bar
    beta = 4.0 / ((1.0 - sim.demand_cap_frac) * params.Q_bar)
    x = beta * (shares * demand_total - cap)
    sat_slope = np.exp(np.minimum(0.0, -x)) / (1.0 + np.exp(-np.abs(x)))
    mc_slope = (params.kappa / params.Q_bar) / (1.0 - Q / params.Q_bar) ** 2
    markup_slope = np.where(
        shares < _MARKUP_SHARE_CAP,
        1.0 / (1.0 - np.minimum(shares, _MARKUP_SHARE_CAP)) ** 2, 0.0)
    chain = mc_slope * demand_total * sat_slope + markup_slope
    return chain[:, None] * ds - np.eye(n)


def solve_static_equilibrium(K, demand_total, params, sim, p_init=None):
    """Solve the one-period serving market for posted prices.

    Two phases.  A damped fixed-point iteration (step scaled per firm,
    with geometric backoff) handles the typical case in a few dozen
    cheap iterations and is globally well-behaved.  If it has not
    converged after _NEWTON_AFTER iterations — in practice only when
    demand sits against the aggregate capacity wall, where the
    fixed-point map's contraction factor degenerates — the remaining
    budget goes to a damped Newton iteration on the analytic Jacobian,
    which is immune to that stiffness.

    Parameters
    ----------
    K : array of capability stocks (positive)
    demand_total : aggregate token demand routed to the market (>= 0)
    params : UpstreamParams
    sim : SimParams (damping, tolerance, iteration cap, capacity fraction)
    p_init : warm-start prices; defaults to the symmetric cold start

    Returns a :class:`MarketEquilibrium`; ``converged`` is False if the
    iteration cap was hit, in which case callers should treat the run as
    numerically failed rather than silently continue.
    """
    K = np.asarray(K, dtype=float)
    if demand_total < 0 or not np.isfinite(demand_total):
        raise ValueError(f"demand_total must be finite and >= 0, got {demand_total}")
    n = K.size
    p = np.array(p_init, dtype=float) if p_init is not None else default_prices(n, params)
    if p.shape != K.shape:
        raise ValueError(f"p_init must align with K, got {p.shape} vs {K.shape}")

    converged = False
    iterations = 0
    residual = np.inf
    best_residual = np.inf
    backoff = 1.0
    stalled = 0
    damped_budget = min(_NEWTON_AFTER, sim.fp_max_iter)
    for iterations in range(1, damped_budget + 1):
        shares, Q = allocate_demand(K, p, demand_total, params, sim)
        p_supply = pricing_rule(shares, Q, params)
        delta = p_supply - p
        # The markup map has diagonal slope -s/(1-s), so a fixed step
        # diverges once any share passes ~0.55.  Scaling the step by
        # (1-s_i) cancels that slope exactly: the markup part of the
        # update then contracts at factor (1 - fp_damping) uniformly in
        # s.  The congestion term can still overshoot near the capacity
        # wall, so the step also backs off geometrically whenever the
        # residual rebounds well above its running best, or stops
        # improving at all.
        residual = float(np.max(np.abs(delta)))
        if residual < sim.fp_tol:
            converged = True
            break
        if residual < best_residual:
            stalled = 0
            # recover after a transient: permanently tiny steps would
            # turn a once-congested solve into a crawl
            backoff = min(1.0, backoff * 1.1)
        else:
            stalled += 1
        if ((residual > 4.0 * best_residual or stalled >= 40)
                and backoff > 1.0 / 1024.0):
            backoff *= 0.5
            stalled = 0
        best_residual = min(best_residual, residual)
        # share capped as in pricing_rule: the step factor must not
        # shrink faster than the markup grows, or a transiently pinned
        # share (warm start far below a post-jump equilibrium) stalls
        step = (sim.fp_damping * backoff) * (1.0 - np.minimum(shares, _MARKUP_SHARE_CAP))
        p = p + step * delta

    while not converged and iterations < sim.fp_max_iter:
        iterations += 1
        F, shares, Q = _pricing_residual(p, K, demand_total, params, sim)
        residual = float(np.max(np.abs(F)))
        if residual < sim.fp_tol:
            converged = True
            break
        J = _pricing_jacobian(p, shares, Q, demand_total, params, sim)
        try:
            dp = np.linalg.solve(J, -F)
        except np.linalg.LinAlgError:
            dp = F  # singular corner: fall back to a plain damped step
        # backtracking on the sup-norm keeps Newton honest far from the
        # solution; if no shrink helps, take the best damped step instead
        accepted = False
        for t in 0.5 ** np.arange(15):
            cand = p + t * dp
            F_cand, _, _ = _pricing_residual(cand, K, demand_total, params, sim)
            if float(np.max(np.abs(F_cand))) < residual * (1.0 - 1e-4 * t):
                p = cand
                accepted = True
                break
        if not accepted:
            p = p + sim.fp_damping * (1.0 - np.minimum(shares, _MARKUP_SHARE_CAP)) * F

    shares, Q = allocate_demand(K, p, demand_total, params, sim)
    return MarketEquilibrium(prices=p, shares=shares, quantities=Q,
                             iterations=iterations, residual=residual,
                             converged=converged)
