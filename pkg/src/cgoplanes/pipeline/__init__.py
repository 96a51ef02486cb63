"""Configuration, phantoms, experiments and the command line."""

from .config import ConfigError, ExperimentConfig  # noqa: F401
from .experiments import EXPERIMENTS, RunReport  # noqa: F401

__all__ = ["ConfigError", "EXPERIMENTS", "ExperimentConfig", "RunReport"]
