"""Energy-aware computation offloading in an end-edge-cloud network."""
from .compmodel import Assignment, check_feasible, system_energy
from .env import EpisodeConfig, OffloadEnv
from .netmodel import ChannelParams, TaskDistConfig, TaskSpec, TopologyConfig, build_topology
from .problem import OffloadProblem

__version__ = "0.1.0"

__all__ = [
    "Assignment", "ChannelParams", "EpisodeConfig", "OffloadEnv", "OffloadProblem", "TaskDistConfig",
    "TaskSpec", "TopologyConfig", "build_topology", "check_feasible", "system_energy",
]
