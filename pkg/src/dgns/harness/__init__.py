"""Configuration, checkpoints, experiment orchestration and the ``dgns`` command."""

from .checkpoint import CheckpointError, load_trajectory, read_checkpoint, write_checkpoint
from .config import ConfigError, RunConfig, load_config, parse_config
from .experiment import diagnose_window, run_experiment, undiagnose_window

__all__ = [
    "CheckpointError",
    "ConfigError",
    "RunConfig",
    "diagnose_window",
    "load_config",
    "load_trajectory",
    "parse_config",
    "read_checkpoint",
    "run_experiment",
    "undiagnose_window",
    "write_checkpoint",
]
