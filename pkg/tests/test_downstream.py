import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aimarketsim.config import DownstreamParams
from aimarketsim.downstream import (
    agent_output,
    aggregate_token_demand,
    arch_efficiency,
    optimal_architecture,
    step_orchestration,
    token_multiplier,
    wrapper_trap_check,
)

# From tests/oracles.py: four rounds of 2001-point grid refinement of
# log J(d) at 40-digit precision, plus the closed-form labor choice.
DEPTH_REF = 0.01093120221            # p=1.0, default params
LABOR_REF = 0.016002890385210894277  # at that depth, O=0.05, K_eff=100, w=2
DEPTH_CHEAP_REF = 0.21914541271805556  # p=0.5, phi_arch=1.6

DEFAULTS = DownstreamParams()


def test_efficiency_and_token_curves():
    assert arch_efficiency(0.0, DEFAULTS) == 1.0
    assert token_multiplier(0.0, DEFAULTS) == 1.0
    d = np.array([0.0, 1.0, 4.0])
    assert arch_efficiency(d, DEFAULTS) == pytest.approx(
        1.0 + DEFAULTS.phi_arch * np.sqrt(d))
    assert token_multiplier(d, DEFAULTS) == pytest.approx(
        1.0 + DEFAULTS.xi_token * d)
    with pytest.raises(ValueError):
        arch_efficiency(-0.1, DEFAULTS)


def test_agent_output_cobb_douglas():
    y = agent_output(2.0, 100.0, 1.0, 3.0, DEFAULTS)
    h = arch_efficiency(1.0, DEFAULTS)
    assert y == pytest.approx(2.0 * (100.0 * h) ** 0.4 * 3.0 ** 0.6)
    assert agent_output(0.0, 100.0, 1.0, 3.0, DEFAULTS) == 0.0


def test_optimal_depth_matches_oracle():
    choice = optimal_architecture(1.0, 100.0, 0.05, DEFAULTS, wage=2.0)
    assert choice.depth == pytest.approx(DEPTH_REF, abs=1e-7)
    assert choice.labor == pytest.approx(LABOR_REF, rel=1e-9)
    assert choice.viable
    assert abs(choice.foc_residual) < 1e-6


def test_optimal_depth_cheap_tokens_matches_oracle():
    params = DownstreamParams(phi_arch=1.6)
    choice = optimal_architecture(0.5, 100.0, 0.05, params, wage=2.0)
    assert choice.depth == pytest.approx(DEPTH_CHEAP_REF, abs=1e-7)


def test_labor_first_order_condition():
    # (1-psi) * margin * Y / L = wage at the optimum
    choice = optimal_architecture(1.0, 100.0, 0.05, DEFAULTS, wage=2.0)
    margin = DEFAULTS.P_Y - 1.0 * token_multiplier(choice.depth, DEFAULTS)
    lhs = (1.0 - DEFAULTS.psi_K) * margin * choice.output / choice.labor
    assert lhs == pytest.approx(2.0, rel=1e-9)


def test_profit_and_tokens_consistent():
    p = 0.8
    c = optimal_architecture(p, 120.0, 0.1, DEFAULTS, wage=2.0)
    assert c.tokens == pytest.approx(c.output * token_multiplier(c.depth, DEFAULTS))
    margin = DEFAULTS.P_Y - p * token_multiplier(c.depth, DEFAULTS)
    assert c.profit == pytest.approx(margin * c.output - 2.0 * c.labor, rel=1e-9)
    assert c.profit > 0


def test_shutdown_when_tokens_unaffordable():
    # P_Y <= p * tau(0): no depth can restore a positive margin
    c = optimal_architecture(DEFAULTS.P_Y, 100.0, 0.05, DEFAULTS, wage=2.0)
    assert not c.viable
    assert c.depth == 0.0 and c.output == 0.0 and c.labor == 0.0


def test_zero_phi_arch_corner():
    params = DownstreamParams(phi_arch=0.0)
    c = optimal_architecture(1.0, 100.0, 0.05, params, wage=2.0)
    assert c.depth == 0.0
    assert c.viable and c.output > 0


@given(p=st.floats(min_value=0.1, max_value=2.5))
@settings(max_examples=60, deadline=None)
def test_depth_decreases_with_token_price(p):
    lo = optimal_architecture(p, 100.0, 0.05, DEFAULTS, wage=2.0)
    hi = optimal_architecture(p * 1.1, 100.0, 0.05, DEFAULTS, wage=2.0)
    assert hi.depth <= lo.depth + 1e-9


@given(scale=st.floats(min_value=0.1, max_value=10.0))
@settings(max_examples=40, deadline=None)
def test_scale_enters_only_through_orchestration(scale):
    # depth is scale-free; output and labor scale as O^(1/psi)
    base = optimal_architecture(1.0, 100.0, 0.05, DEFAULTS, wage=2.0)
    big = optimal_architecture(1.0, 100.0, 0.05 * scale, DEFAULTS, wage=2.0)
    assert big.depth == pytest.approx(base.depth, abs=1e-8)
    factor = scale ** (1.0 / DEFAULTS.psi_K)
    assert big.output == pytest.approx(base.output * factor, rel=1e-6)
    assert big.labor == pytest.approx(base.labor * factor, rel=1e-6)


def test_step_orchestration_euler_and_floor():
    O = np.array([1.0, 0.001])
    Y = np.array([2.0, 0.0])
    g = 0.1
    nxt = step_orchestration(O, Y, g, DEFAULTS, 0.1)
    decay = DEFAULTS.mu_O + DEFAULTS.xi_cann * g
    assert nxt == pytest.approx(
        O + 0.1 * (DEFAULTS.phi_learn * Y - decay * O))
    # decay over a huge step floors at zero instead of going negative
    assert step_orchestration(np.array([0.01]), np.array([0.0]), g,
                              DEFAULTS, 1e4)[0] == 0.0


def test_wrapper_trap_check_signs():
    params = DownstreamParams(phi_learn=0.05, mu_O=0.01, xi_cann=0.2)
    # phi*Y/O vs mu + xi*g: pick Y on each side of the knife-edge
    g = 0.1
    decay = params.mu_O + params.xi_cann * g
    O = 1.0
    edge = decay * O / params.phi_learn
    assert wrapper_trap_check(O, edge * 2.0, g, params) == "growing"
    assert wrapper_trap_check(O, edge * 0.5, g, params) == "shrinking"
    assert wrapper_trap_check(O, edge, g, params) == "boundary"
    with pytest.raises(ValueError):
        wrapper_trap_check(0.0, 1.0, g, params)


def test_aggregate_token_demand():
    out = np.array([1.0, 2.0])
    total = aggregate_token_demand(out, 0.5, DEFAULTS)
    assert total == pytest.approx(3.0 * token_multiplier(0.5, DEFAULTS))
