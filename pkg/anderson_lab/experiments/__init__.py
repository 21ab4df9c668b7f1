"""Experiment configuration, orchestration and output."""

from .config import ExperimentConfig
from .output import TableWriter
from .runner import ExperimentRunner

__all__ = ["ExperimentConfig", "ExperimentRunner", "TableWriter"]
