"""Command-line front end."""

from .config import ExperimentConfig, load_config
from .main import main

__all__ = ["ExperimentConfig", "load_config", "main"]
