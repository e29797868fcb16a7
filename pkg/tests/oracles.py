"""Independent reference implementations backing the frozen test values.

Nothing in here imports the package under test.  Each function recomputes
a quantity the simulator also computes, using a different method (mpmath
high-precision arithmetic, brute-force grid search, or a textbook
formula), so the literals frozen into the tests can be regenerated:

    python -m tests.oracles

prints every frozen value used by the suite.  If an implementation
change moves one of these, the right response is to understand why, not
to update the literal.
"""

from __future__ import annotations

import mpmath as mp

mp.mp.dps = 40


# ----------------------------------------------------------------------
# CES production


def ces_reference(A, C, D, alpha, rho, gamma):
    """F = A * (alpha*C^rho + (1-alpha)*D^rho)^(gamma/rho), 40 digits."""
    A, C, D = mp.mpf(A), mp.mpf(C), mp.mpf(D)
    alpha, rho, gamma = mp.mpf(alpha), mp.mpf(rho), mp.mpf(gamma)
    inner = alpha * C ** rho + (1 - alpha) * D ** rho
    return A * inner ** (gamma / rho)


def ces_marginal_compute_reference(A, C, D, alpha, rho, gamma):
    """dF/dC via mpmath's numerical derivative of the exact expression."""
    f = lambda c: ces_reference(A, c, D, alpha, rho, gamma)
    return mp.diff(f, mp.mpf(C))


# ----------------------------------------------------------------------
# agent architecture depth


def depth_reference(p, psi, P_Y, phi_arch, nu_arch, xi_token):
    """Brute-force maximiser of J(d) = h(d) * (P_Y - p*tau(d))^(1/psi).

    Four rounds of 2001-point grid refinement at 40-digit precision,
    bracketing the (unique, interior) optimum to ~1e-12 of the search
    range — far below the float tolerances the tests use.  Depth does
    not depend on O or K_eff (they factor out of J), so neither appears.
    """
    p, psi, P_Y = mp.mpf(p), mp.mpf(psi), mp.mpf(P_Y)
    phi, nu, xi = mp.mpf(phi_arch), mp.mpf(nu_arch), mp.mpf(xi_token)

    def log_J(d):
        margin = P_Y - p * (1 + xi * d)
        if margin <= 0:
            return mp.mpf("-inf")
        return mp.log(1 + phi * d ** nu) + mp.log(margin) / psi

    lo, hi = mp.mpf(0), (P_Y / p - 1) / xi
    for _ in range(4):
        n = 2000
        step = (hi - lo) / n
        vals = [log_J(lo + k * step) for k in range(n + 1)]
        k_best = max(range(n + 1), key=lambda k: vals[k])
        lo = max(mp.mpf(0), lo + (k_best - 1) * step)
        hi = lo + 2 * step
    return (lo + hi) / 2


def labor_reference(d, O, K_eff, psi, P_Y, p, phi_arch, nu_arch, xi_token, wage):
    """Closed-form inner solution L* at depth d (independent re-derivation).

    From Y = O*(K_eff*h)^psi * L^(1-psi), max_L m*Y - w*L gives
    (1-psi)*m*Y/L = w.
    """
    d, O, K_eff = mp.mpf(d), mp.mpf(O), mp.mpf(K_eff)
    psi, P_Y, p, w = mp.mpf(psi), mp.mpf(P_Y), mp.mpf(p), mp.mpf(wage)
    h = 1 + mp.mpf(phi_arch) * d ** mp.mpf(nu_arch)
    m = P_Y - p * (1 + mp.mpf(xi_token) * d)
    base = (K_eff * h) ** psi
    return ((1 - psi) * m * O * base / w) ** (1 / psi)


# ----------------------------------------------------------------------
# serving-market equilibrium


def symmetric_equilibrium_price(n, demand_total, theta, c0, kappa, Q_bar):
    """Interior symmetric equilibrium: p = mc(demand/n) + 1/(1 - 1/n)."""
    Q = mp.mpf(demand_total) / n
    mc = mp.mpf(c0) + mp.mpf(kappa) / (1 - Q / mp.mpf(Q_bar))
    return mc + 1 / (1 - mp.mpf(1) / n)


def two_firm_equilibrium_reference(K1, K2, demand_total, theta, c0, kappa,
                                   Q_bar, damping="0.02", iters=60000):
    """Asymmetric duopoly fixed point by slow damped iteration, 40 digits.

    Same economic mapping as the package solver (logit shares, congestion
    marginal cost, 1/(1-s) markup) but written independently and pushed
    to high precision with a tiny step; converges linearly, so many
    iterations buy an answer good far beyond float resolution.
    """
    K = [mp.mpf(K1), mp.mpf(K2)]
    th, c0, kp, Qb = mp.mpf(theta), mp.mpf(c0), mp.mpf(kappa), mp.mpf(Q_bar)
    dem = mp.mpf(demand_total)
    lam = mp.mpf(damping)
    p = [c0 + kp + 2, c0 + kp + 2]
    for _ in range(iters):
        u = [th * mp.log(K[i]) - p[i] for i in range(2)]
        mx = max(u)
        w = [mp.e ** (ui - mx) for ui in u]
        tot = w[0] + w[1]
        s = [wi / tot for wi in w]
        Q = [si * dem for si in s]
        tgt = [c0 + kp / (1 - Q[i] / Qb) + 1 / (1 - s[i]) for i in range(2)]
        p = [p[i] + lam * (tgt[i] - p[i]) for i in range(2)]
    return p, s, Q


# ----------------------------------------------------------------------
# 2x2 eigenvalues


def eig2_reference(a, b, c, d):
    """Eigenvalues of [[a, b], [c, d]] by the quadratic formula."""
    a, b, c, d = (mp.mpf(x) for x in (a, b, c, d))
    tr, det = a + d, a * d - b * c
    disc = mp.sqrt(tr * tr - 4 * det)
    return (tr + disc) / 2, (tr - disc) / 2


# ----------------------------------------------------------------------


def _print_frozen():
    print("# CES at A=1, C=2, D=3, alpha=0.35, rho=-0.2, gamma=1.3")
    print(" ", mp.nstr(ces_reference(1, 2, 3, "0.35", "-0.2", "1.3"), 20))
    print("# dF/dC at the same point")
    print(" ", mp.nstr(ces_marginal_compute_reference(1, 2, 3, "0.35", "-0.2", "1.3"), 20))

    print("# depth at default downstream params, p=1.0")
    d = depth_reference("1.0", "0.4", 3, "0.5", "0.5", "1.8")
    print(" ", mp.nstr(d, 20))
    print("# matching L* for O=0.05, K_eff=100, wage=2")
    print(" ", mp.nstr(labor_reference(d, "0.05", 100, "0.4", 3, "1.0",
                                       "0.5", "0.5", "1.8", 2), 20))
    print("# depth at the price-cut preset, p=0.5, phi_arch=1.6")
    print(" ", mp.nstr(depth_reference("0.5", "0.4", 3, "1.6", "0.5", "1.8"), 20))

    print("# symmetric 4-firm price at demand 1.6")
    print(" ", mp.nstr(symmetric_equilibrium_price(4, "1.6", "2.5", "0.1",
                                                   "0.05", 1), 20))
    print("# duopoly K=(120, 80), demand 1.2")
    p, s, Q = two_firm_equilibrium_reference(120, 80, "1.2", "2.5", "0.1",
                                             "0.05", 1)
    for i in range(2):
        print(f"  p{i} =", mp.nstr(p[i], 20))
        print(f"  s{i} =", mp.nstr(s[i], 20))
        print(f"  Q{i} =", mp.nstr(Q[i], 20))


if __name__ == "__main__":
    _print_frozen()
