"""Attention readout heads: one per (frozen encoder, task) pair."""

from .heads import TASKS, ReadoutConfig, ReadoutHead, TaskOutput, TaskQueries, decode, decode_batch, init_head
from .train import UNCERTAINTY_THRESHOLD_PX, ReadoutSettings, train_readout

__all__ = [
    "TASKS",
    "ReadoutConfig",
    "ReadoutHead",
    "TaskOutput",
    "TaskQueries",
    "decode",
    "decode_batch",
    "init_head",
    "ReadoutSettings",
    "train_readout",
    "UNCERTAINTY_THRESHOLD_PX",
]
