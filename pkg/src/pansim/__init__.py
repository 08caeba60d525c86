"""pansim: a deterministic, seedable pandemic-management simulator.

Synthetic agents move across zones, a SEIRD engine spreads infection over
per-tick contact graphs, a simulated device/edge/cloud fabric transports
privacy-protected reports, and edge-resident decision modules (vaccine
allocation, dynamic lockdown, mobility scheduling, forecasting) feed
choices back into the world.
"""

__version__ = "0.1.0"

from .config import ConfigError, ScenarioConfig, load_config, parse_config
from .harness import InvariantViolation, RunReport, run_scenario, write_outputs
from .world import Agent, Compartment, WorldState, Zone, build_world, zone_metrics

__all__ = [
    "Agent",
    "Compartment",
    "ConfigError",
    "InvariantViolation",
    "RunReport",
    "ScenarioConfig",
    "WorldState",
    "Zone",
    "build_world",
    "load_config",
    "parse_config",
    "run_scenario",
    "write_outputs",
    "zone_metrics",
    "__version__",
]
