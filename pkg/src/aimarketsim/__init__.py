"""Deterministic simulator of a two-tier AI industry.

Upstream, a handful of foundation-model firms compete in a logit token
market, reinvest revenue into CES capability production, and are eroded
by frontier advance and by rivals pulling ahead; usage feeds a data
flywheel.  Downstream, a population of agent developers chooses
architecture depth against the token price while frontier progress
cannibalises their orchestration capital.  Scenarios are plain
dataclasses, runs are bitwise reproducible, and traces serialise to
documented CSV/JSON schemas.
"""

__version__ = "0.1.0"

from .config import (
    ConfigError,
    DownstreamParams,
    FrontierParams,
    ScenarioConfig,
    ShockSpec,
    SimParams,
    UpstreamParams,
    load_scenario,
    with_overrides,
)
from .engine import NumericalError, Simulation, SimulationTrace, run

__all__ = [
    "ConfigError",
    "DownstreamParams",
    "FrontierParams",
    "NumericalError",
    "ScenarioConfig",
    "ShockSpec",
    "SimParams",
    "Simulation",
    "SimulationTrace",
    "UpstreamParams",
    "__version__",
    "load_scenario",
    "run",
    "with_overrides",
]
