"""Discrete-event simulator of quantum dataframe transmission over an
entanglement-based backbone joining two packetized quantum subnetworks."""

from .engine import MetricsBin, RandomStreams, RunResult, run
from .geometry import GroundStation, SatellitePassModel, VisibilityWindow
from .linkbudget import FiberLink, FreeSpaceLinkParams
from .scenario import (
    ConfigError,
    Policy,
    ScenarioConfig,
    config_to_dict,
    default_config,
    load_config,
    load_config_file,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "FiberLink",
    "FreeSpaceLinkParams",
    "GroundStation",
    "MetricsBin",
    "Policy",
    "RandomStreams",
    "RunResult",
    "SatellitePassModel",
    "ScenarioConfig",
    "VisibilityWindow",
    "config_to_dict",
    "default_config",
    "load_config",
    "load_config_file",
    "run",
    "__version__",
]
