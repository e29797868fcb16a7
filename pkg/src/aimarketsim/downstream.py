"""Downstream agent developers: architecture choice and orchestration capital.

An agent developer turns foundation-model tokens into sold output with

    Y = O * (K_eff * h(d))^psi * L^(1-psi)

where O is firm-specific orchestration capital, K_eff the (share-weighted)
capability of the models it calls, L hired labor, and d >= 0 the depth of
its agent architecture.  Depth buys effectiveness, h(d) = 1 + phi*d^nu,
but burns tokens, tau(d) = 1 + xi*d per unit of output.  Given the token
price the agent solves a two-stage problem: labor has a closed form, and
the remaining one-dimensional depth problem maximises

    J(d) = h(d) * (P_Y - p * tau(d))^(1/psi),

which has a unique interior optimum whenever the margin at d = 0 is
positive (h has infinite marginal efficiency at zero depth, the margin
term eventually dominates).  Depth is therefore identical across agents;
scale differences show up only through O.

Orchestration capital accumulates by doing, dO/dt = phi_learn * Y, and
decays with obsolescence plus frontier cannibalisation, (mu_O +
xi_cann * g_A) * O: every frontier release absorbs part of what the
agent's scaffolding used to add.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar


def arch_efficiency(d, params):
    """Effectiveness multiplier h(d) = 1 + phi_arch * d^nu_arch."""
    d = np.asarray(d, dtype=float)
    if np.any(d < 0):
        raise ValueError("architecture depth must be >= 0")
    out = 1.0 + params.phi_arch * d ** params.nu_arch
    return float(out) if out.ndim == 0 else out


def token_multiplier(d, params):
    """Tokens consumed per unit output, tau(d) = 1 + xi_token * d."""
    d = np.asarray(d, dtype=float)
    if np.any(d < 0):
        raise ValueError("architecture depth must be >= 0")
    out = 1.0 + params.xi_token * d
    return float(out) if out.ndim == 0 else out


def agent_output(O, K_eff, d, L, params):
    """Production Y = O * (K_eff * h(d))^psi * L^(1-psi)."""
    O = np.asarray(O, dtype=float)
    L = np.asarray(L, dtype=float)
    if K_eff <= 0:
        raise ValueError("K_eff must be > 0")
    if np.any(O < 0) or np.any(L < 0):
        raise ValueError("O and L must be >= 0")
    h = arch_efficiency(d, params)
    out = O * (K_eff * h) ** params.psi_K * L ** (1.0 - params.psi_K)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class ArchChoice:
    """Solved plan for one period at a given token price."""

    depth: float          # common across agents
    labor: np.ndarray     # per-agent L*
    output: np.ndarray    # per-agent Y*
    tokens: np.ndarray    # per-agent token demand tau(d)*Y*
    profit: np.ndarray    # per-agent operating profit
    foc_residual: float   # d(ln J)/dd at the optimum (diagnostic)
    viable: bool          # False when the margin is negative even at d=0


def optimal_architecture(p_token, K_eff, O, params, wage=None):
    """Profit-maximising depth, labor and output for agents with capital O.

    ``O`` may be a scalar or an array; depth and the first-order-condition
    residual are shared, per-agent quantities scale as O^(1/psi).  When
    the token price makes even the shallowest architecture unprofitable
    (P_Y <= p * tau(0)) the sector shuts down for the period: everything
    zero, ``viable`` False.  ``wage`` overrides ``params.wage`` so callers
    can apply wage drift without rebuilding the config.
    """
    if p_token <= 0 or not np.isfinite(p_token):
        raise ValueError(f"token price must be positive and finite, got {p_token}")
    if K_eff <= 0:
        raise ValueError("K_eff must be > 0")
    O = np.atleast_1d(np.asarray(O, dtype=float))
    if np.any(O < 0):
        raise ValueError("orchestration capital must be >= 0")
    psi, P_Y = params.psi_K, params.P_Y
    w = params.wage if wage is None else wage
    if w <= 0:
        raise ValueError(f"wage must be > 0, got {w}")

    margin0 = P_Y - p_token * token_multiplier(0.0, params)
    zeros = np.zeros_like(O)
    if margin0 <= 0:
        return ArchChoice(0.0, zeros, zeros, zeros, zeros, 0.0, False)

    d_max = (P_Y / p_token - 1.0) / params.xi_token

    def neg_log_J(d):
        m = P_Y - p_token * token_multiplier(d, params)
        return -(np.log(arch_efficiency(d, params)) + np.log(m) / psi)

    if params.phi_arch == 0.0:
        d_star = 0.0  # depth buys nothing; corner
    else:
        res = minimize_scalar(neg_log_J, bounds=(0.0, d_max * (1.0 - 1e-12)),
                              method="bounded", options={"xatol": 1e-10})
        d_star = float(res.x)

    h = arch_efficiency(d_star, params)
    m = P_Y - p_token * token_multiplier(d_star, params)
    # FOC in logs: psi * h'/h == p*xi / m at an interior optimum
    foc = psi * params.phi_arch * params.nu_arch * d_star ** (params.nu_arch - 1.0) / h \
        - p_token * params.xi_token / m if d_star > 0 else 0.0

    # closed-form inner problem: L* = ((1-psi) * m * O * (K_eff*h)^psi / w)^(1/psi)
    base = (K_eff * h) ** psi
    labor = ((1.0 - psi) * m * O * base / w) ** (1.0 / psi)
    output = O * base * labor ** (1.0 - psi)
    tokens = token_multiplier(d_star, params) * output
    profit = m * output - w * labor
    return ArchChoice(d_star, labor, output, tokens, profit, float(foc), True)


def aggregate_token_demand(output, depth, params):
    """Total tokens demanded by agents producing ``output`` at shared depth."""
    output = np.asarray(output, dtype=float)
    if np.any(output < 0):
        raise ValueError("output must be >= 0")
    return float(token_multiplier(depth, params) * output.sum())


def step_orchestration(O, Y, g_A, params, dt):
    """Euler step of dO/dt = phi_learn*Y - (mu_O + xi_cann*g_A)*O, floored at 0."""
    O = np.asarray(O, dtype=float)
    Y = np.asarray(Y, dtype=float)
    decay = params.mu_O + params.xi_cann * g_A
    nxt = O + dt * (params.phi_learn * Y - decay * O)
    return np.maximum(nxt, 0.0)


def wrapper_trap_check(O, Y, g_A, params):
    """Classify an agent's position in the learning-vs-cannibalisation race.

    Returns "growing", "shrinking" or "boundary" according to the sign of
    phi_learn*Y/O - (mu_O + xi_cann*g_A); the knife-edge is declared at
    |difference| < 1e-12.
    """
    if O <= 0:
        raise ValueError("wrapper_trap_check needs O > 0")
    if Y < 0:
        raise ValueError("output must be >= 0")
    rate = params.phi_learn * Y / O - (params.mu_O + params.xi_cann * g_A)
    if abs(rate) < 1e-12:
        return "boundary"
    return "growing" if rate > 0 else "shrinking"
