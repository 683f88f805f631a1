"""Pipeline orchestration, configuration, evaluation, reporting, CLI."""

from .config import CONFIG_SCHEMA, config_hash, default_config, load_config, smoke_config, validate_config
from .pipeline import STAGES, TRAINING_STAGES, Pipeline, run_pipeline
from .reporting import write_report

__all__ = [
    "CONFIG_SCHEMA",
    "config_hash",
    "default_config",
    "load_config",
    "smoke_config",
    "validate_config",
    "STAGES",
    "TRAINING_STAGES",
    "Pipeline",
    "run_pipeline",
    "write_report",
]
