from .scenario import ScenarioConfig, ScenarioError, UeSpec, default_scenario
from .sim import MetricsLog, MetricsRow, Simulator, run

__all__ = [
    "ScenarioConfig",
    "ScenarioError",
    "UeSpec",
    "default_scenario",
    "MetricsLog",
    "MetricsRow",
    "Simulator",
    "run",
]
