"""Upstream production side: capability output, data flywheel, frontier.

The capability stock of each foundation-model firm is produced from
purchased compute C and accumulated interaction data D through a CES
aggregate with mild complementarity (rho < 0) and increasing returns
(gamma > 1):

    F = A * (alpha * C^rho + (1 - alpha) * D^rho)^(gamma / rho)

With rho < 0 either input at zero drives output to zero — compute
cannot substitute for having no data and vice versa.  The data stock
follows usage: dD/dt = eta * Q - mu_D * D, so serving traffic today is
tomorrow's training corpus.  The research frontier A(t) is exogenous
and grows exponentially; the engine advances it with the exact
exponential map rather than an Euler step so frontier growth never
carries discretisation error.
"""

from __future__ import annotations

import numpy as np


def gross_production(A, C, D, params):
    """CES capability output for compute C and data D at frontier level A.

    Accepts scalars or arrays (broadcast).  Zero C or D yields exactly
    zero output (the rho < 0 limit), without warnings.
    """
    if A < 0:
        raise ValueError(f"frontier level must be >= 0, got {A}")
    C = np.asarray(C, dtype=float)
    D = np.asarray(D, dtype=float)
    if np.any(C < 0) or np.any(D < 0):
        raise ValueError("compute and data inputs must be >= 0")
    rho, alpha, gamma = params.rho_ces, params.alpha, params.gamma_scale
    if rho == 0:
        raise ValueError("rho = 0 (Cobb-Douglas limit) is not supported")
    out = np.zeros(np.broadcast(C, D).shape)
    pos = (C > 0) & (D > 0)
    if np.any(pos):
        Cp = np.broadcast_to(C, out.shape)[pos]
        Dp = np.broadcast_to(D, out.shape)[pos]
        # evaluate in logs: rho<0 makes x^rho explode for tiny x otherwise
        inner = alpha * np.exp(rho * np.log(Cp)) + (1 - alpha) * np.exp(rho * np.log(Dp))
        out[pos] = A * np.exp((gamma / rho) * np.log(inner))
    if out.ndim == 0:
        return float(out)
    return out


def compute_from_investment(revenue, params):
    """Compute purchases under the fixed reinvestment policy C = rate * revenue."""
    revenue = np.asarray(revenue, dtype=float)
    if np.any(revenue < 0):
        raise ValueError("revenue must be >= 0")
    return params.invest_rate * revenue


def step_data(D, Q, params, dt):
    """One Euler step of the data flywheel dD/dt = eta*Q - mu_D*D.

    Floors at zero: the corpus cannot go negative however large mu_D*dt.
    """
    D = np.asarray(D, dtype=float)
    Q = np.asarray(Q, dtype=float)
    nxt = D + dt * (params.eta * Q - params.mu_D * D)
    return np.maximum(nxt, 0.0)


def step_frontier(A, g_A, dt, jump_factor=1.0):
    """Advance the frontier by the exact exponential map, then any jump."""
    if A <= 0:
        raise ValueError(f"frontier level must be > 0, got {A}")
    return A * np.exp(g_A * dt) * jump_factor


def data_steady_state(Q, params):
    """Fixed point of the flywheel at constant traffic: D* = (eta/mu_D) * Q."""
    return params.eta_over_mu * np.asarray(Q, dtype=float)


def marginal_product_compute(A, C, D, params):
    """dF/dC for the CES aggregate; zero wherever output is zero.

    Used to turn observed compute spending into a marginal R&D
    productivity series (the innovation-tax diagnostic divides the
    economic depreciation rate by this, scaled per unit of stock).
    """
    C = np.asarray(C, dtype=float)
    D = np.asarray(D, dtype=float)
    rho, alpha, gamma = params.rho_ces, params.alpha, params.gamma_scale
    out = np.zeros(np.broadcast(C, D).shape)
    pos = (C > 0) & (D > 0)
    if np.any(pos):
        Cp = np.broadcast_to(C, out.shape)[pos]
        Dp = np.broadcast_to(D, out.shape)[pos]
        inner = alpha * np.exp(rho * np.log(Cp)) + (1 - alpha) * np.exp(rho * np.log(Dp))
        # dF/dC = A * gamma * alpha * C^(rho-1) * inner^((gamma-rho)/rho)
        out[pos] = A * gamma * alpha * np.exp(
            (rho - 1.0) * np.log(Cp) + ((gamma - rho) / rho) * np.log(inner)
        )
    if out.ndim == 0:
        return float(out)
    return out
