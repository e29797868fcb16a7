"""Competitive depreciation and model-valuation diagnostics.

A frontier model loses economic value through three channels: the
steady advance of the public frontier (``delta0``), the embodied
knowledge that each frontier doubling makes obsolete (``delta1 * g_A``),
and displacement by a rival that pulls ahead (``delta2 * gap``).  The
gap term is the interesting one: it converts a *relative* capability
deficit into an *absolute* carrying cost, which is what lets small
leads compound.

Economic depreciation (what shows up in a valuation) and physical stock
decay (what the capability state actually does) are deliberately
separated here.  ``depreciation_rate`` always reports the full
three-channel rate; ``stock_decay_rate`` applies whichever subset the
scenario's ``stock_depreciation`` mode selects, so the same reported
economics can be paired with different laws of motion.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "competitive_gap",
    "competitive_gaps",
    "depreciation_rate",
    "stock_decay_rate",
    "shadow_value_index",
    "required_innovation_intensity",
    "cross_depreciation_elasticity",
]


def competitive_gap(K_i, K_rivals):
    """Log capability shortfall of one firm against its best rival.

    Returns ``max(0, ln(max(K_rivals) / K_i))``: zero for the leader,
    positive for everyone behind.  A firm with no rivals has no gap.
    """
    K_i = float(K_i)
    if not np.isfinite(K_i) or K_i <= 0:
        raise ValueError(f"K_i must be positive and finite, got {K_i}")
    K_rivals = np.asarray(K_rivals, dtype=float)
    if K_rivals.size == 0:
        return 0.0
    if np.any(~np.isfinite(K_rivals)) or np.any(K_rivals <= 0):
        raise ValueError("rival capabilities must be positive and finite")
    return float(max(0.0, np.log(K_rivals.max() / K_i)))


def competitive_gaps(K):
    """Per-firm competitive gaps against the best *other* firm.

    Vectorised form of :func:`competitive_gap` over a capability
    vector.  The leader is measured against the runner-up, so its gap
    is zero unless there is an exact tie (in which case it is zero
    anyway).  Returns an array of zeros for a monopoly.
    """
    K = np.asarray(K, dtype=float)
    if K.ndim != 1 or K.size == 0:
        raise ValueError("K must be a non-empty 1-D array")
    if np.any(~np.isfinite(K)) or np.any(K <= 0):
        raise ValueError("capabilities must be positive and finite")
    if K.size == 1:
        return np.zeros(1)
    order = np.argsort(K)
    best, second = K[order[-1]], K[order[-2]]
    # Best rival is the overall max for everyone except the (first)
    # argmax, which faces the runner-up.
    rival_best = np.full(K.shape, best)
    rival_best[order[-1]] = second
    return np.maximum(0.0, np.log(rival_best / K))


def depreciation_rate(gap, g_A, params):
    """Economic depreciation rate delta0 + delta1*g_A + delta2*max(0, gap).

    This is the rate a valuation would charge against the stock: frontier
    advance and competitive displacement both destroy resale value even
    when the weights themselves are untouched.
    """
    gap = np.asarray(gap, dtype=float)
    out = params.delta0 + params.delta1 * g_A + params.delta2 * np.maximum(0.0, gap)
    if out.ndim == 0:
        return float(out)
    return out


def stock_decay_rate(gap, g_A, params):
    """Physical decay rate applied to the capability stock.

    Which economic-depreciation channels feed back into the law of
    motion is a modelling choice, selected by ``stock_depreciation``:

    - ``"baseline"``: only obsolescence, ``delta0``.  Relative positions
      then evolve purely through investment differences.
    - ``"gap"``: ``delta0`` plus the displacement term, but only past an
      activation margin (``gap_activation``) so that infinitesimal
      asymmetries do not self-amplify.
    - ``"full"``: all three channels, no activation margin.
    """
    gap = np.asarray(gap, dtype=float)
    mode = params.stock_depreciation
    if mode == "baseline":
        out = np.full(gap.shape, float(params.delta0))
    elif mode == "gap":
        excess = np.maximum(0.0, gap - params.gap_activation)
        out = params.delta0 + params.delta2 * excess
    elif mode == "full":
        out = params.delta0 + params.delta1 * g_A + params.delta2 * np.maximum(0.0, gap)
    else:  # pragma: no cover - config validation rejects this earlier
        raise ValueError(f"unknown stock_depreciation mode {mode!r}")
    if out.ndim == 0:
        return float(out)
    return out


def shadow_value_index(shares, K, theta):
    """Marginal value of capability, up to a common scale factor.

    Under logit demand the derivative of a firm's share with respect to
    its own log capability is ``theta * s * (1 - s)``, so the marginal
    revenue of one more unit of K is proportional to
    ``theta * s * (1 - s) / K``.  Reported as an index; the engine
    normalises it to the t=0 cross-firm mean so traces start at 1.
    """
    shares = np.asarray(shares, dtype=float)
    K = np.asarray(K, dtype=float)
    if shares.shape != K.shape:
        raise ValueError("shares and K must have the same shape")
    if np.any(K <= 0):
        raise ValueError("capabilities must be positive")
    return theta * shares * (1.0 - shares) / K


def required_innovation_intensity(delta_total, marginal_rd_productivity):
    """R&D spend per unit stock needed to stand still.

    A stock depreciating at rate ``delta_total`` needs gross additions
    at the same rate just to hold level; dividing by the marginal
    productivity of R&D spending converts that into a spending
    intensity.  Rising competitive depreciation therefore acts like a
    tax on incumbency: the intensity needed merely to *maintain*
    position grows with the gap a rival opens.
    """
    delta_total = float(delta_total)
    marginal_rd_productivity = float(marginal_rd_productivity)
    if delta_total < 0:
        raise ValueError(f"delta_total must be non-negative, got {delta_total}")
    if marginal_rd_productivity <= 0:
        raise ValueError(
            "marginal_rd_productivity must be positive, got "
            f"{marginal_rd_productivity}"
        )
    return delta_total / marginal_rd_productivity


def cross_depreciation_elasticity(trace, shock_time, leader):
    """Elasticity of rival shadow values to a jump in the leader's capability.

    Measures, over the single recorded step containing ``shock_time``,
    how the mean rival shadow value responds to the leader's capability
    move::

        d ln(mean rival shadow value) / d ln(K_leader)

    ``trace`` needs ``times`` (T+1,), ``capability`` (T+1, N) and
    ``shadow_value`` (T+1, N) arrays; any object with those attributes
    works.  Raises if the window falls off the end of the trace or the
    leader's capability did not move (the elasticity is undefined).
    """
    times = np.asarray(trace.times, dtype=float)
    K = np.asarray(trace.capability, dtype=float)
    q = np.asarray(trace.shadow_value, dtype=float)
    n_firms = K.shape[1]
    if not 0 <= leader < n_firms:
        raise ValueError(f"leader index {leader} out of range for {n_firms} firms")
    if n_firms < 2:
        raise ValueError("need at least one rival to measure a cross elasticity")
    i0 = int(np.searchsorted(times, shock_time, side="left"))
    if i0 >= times.size - 1:
        raise ValueError(
            f"shock_time {shock_time} leaves no post-shock row in the trace"
        )
    rivals = np.arange(n_firms) != leader
    q0 = q[i0, rivals].mean()
    q1 = q[i0 + 1, rivals].mean()
    K0, K1 = K[i0, leader], K[i0 + 1, leader]
    if q0 <= 0 or q1 <= 0 or K0 <= 0 or K1 <= 0:
        raise ValueError("shadow values and capabilities must be positive in the window")
    dlnK = np.log(K1 / K0)
    if dlnK == 0.0:
        raise ValueError("leader capability did not move across the shock window")
    return float(np.log(q1 / q0) / dlnK)
