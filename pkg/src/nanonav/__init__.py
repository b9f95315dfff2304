"""Q-learning nanorobot navigation in a 3D biomarker field."""

from nanonav.agent import Action, EpsilonSchedule, LearningParams, QTable, StateId
from nanonav.config import ConfigError, SimConfig, parse_config
from nanonav.environment import Environment, InfeasibleConfigError, new_environment
from nanonav.engine import EpisodeMetrics, EpisodeTrace, TrainingReport, run_episode, run_training
from nanonav.field import BiomarkerSource, FieldModel, HeatmapGrid, Vec3

__all__ = [
    "Action",
    "BiomarkerSource",
    "ConfigError",
    "Environment",
    "EpisodeMetrics",
    "EpisodeTrace",
    "EpsilonSchedule",
    "FieldModel",
    "HeatmapGrid",
    "InfeasibleConfigError",
    "LearningParams",
    "QTable",
    "SimConfig",
    "StateId",
    "TrainingReport",
    "Vec3",
    "new_environment",
    "parse_config",
    "run_episode",
    "run_training",
]

__version__ = "0.1.0"
