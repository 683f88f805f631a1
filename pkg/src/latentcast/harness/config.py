"""Run configuration: JSON document, published schema, content hashing."""

from __future__ import annotations

import copy
import hashlib
import json
from pathlib import Path

import jsonschema

__all__ = ["CONFIG_SCHEMA", "default_config", "smoke_config", "load_config", "validate_config", "config_hash"]

_NUM = {"type": "number"}
_INT = {"type": "integer"}
_STR = {"type": "string"}

CONFIG_SCHEMA = {
    "$schema": "http://json-schema.org/draft-07/schema#",
    "title": "latentcast run configuration",
    "type": "object",
    "additionalProperties": False,
    "required": ["world", "data", "encoders", "readouts", "forecaster", "sampling"],
    "properties": {
        "world": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "height": _INT,
                "width": _INT,
                "objects": _INT,
                "shapes": {"type": "array", "items": _STR, "minItems": 1},
                "z_min": _NUM,
                "z_max": _NUM,
                "speed_min": _NUM,
                "speed_max": _NUM,
                "radius_min": _NUM,
                "radius_max": _NUM,
                "branch_frame": _INT,
                "branch_count": _INT,
                "tracked_points": _INT,
                "frames": _INT,
                "background_cell": _INT,
            },
        },
        "data": {
            "type": "object",
            "additionalProperties": False,
            "required": ["train_worlds", "readout_worlds", "eval_worlds", "seed"],
            "properties": {
                "train_worlds": _INT,
                "train_branches": _INT,
                "readout_worlds": _INT,
                "eval_worlds": _INT,
                "seed": _INT,
            },
        },
        "encoders": {
            "type": "object",
            "additionalProperties": False,
            "required": ["variants", "seed"],
            "properties": {
                "variants": {"type": "array", "items": {"enum": ["random-frozen", "pixel-identity", "image-mae", "video-mae"]}},
                "patch": _INT,
                "dim": _INT,
                "depth": _INT,
                "heads": _INT,
                "mlp_ratio": _INT,
                "mask_ratio": _NUM,
                "pretrain_steps": {"type": "object", "additionalProperties": _INT},
                "batch": _INT,
                "lr": _NUM,
                "decoder_depth": _INT,
                "seed": _INT,
            },
        },
        "readouts": {
            "type": "object",
            "additionalProperties": False,
            "required": ["seed"],
            "properties": {
                "dim": _INT,
                "blocks": _INT,
                "heads": _INT,
                "mlp_ratio": _INT,
                "steps": _INT,
                "batch": _INT,
                "lr": _NUM,
                "seed": _INT,
            },
        },
        "forecaster": {
            "type": "object",
            "additionalProperties": False,
            "required": ["seed"],
            "properties": {
                "dim": _INT,
                "depth": _INT,
                "heads": _INT,
                "mlp_ratio": _INT,
                "steps": _INT,
                "batch": _INT,
                "lr": _NUM,
                "schedule_steps": _INT,
                "seed": _INT,
                "regression_variants": {"type": "array", "items": _STR},
            },
        },
        "sampling": {
            "type": "object",
            "additionalProperties": False,
            "required": ["seed"],
            "properties": {"num_samples": _INT, "seed": _INT},
        },
    },
}


def default_config() -> dict:
    """Desk-scale defaults: full four-encoder pipeline in tens of minutes."""
    return {
        "world": {
            "height": 32,
            "width": 32,
            "objects": 3,
            "shapes": ["disk", "square", "triangle"],
            "z_min": 2.0,
            "z_max": 10.0,
            "speed_min": 0.5,
            "speed_max": 1.1,
            "radius_min": 3.5,
            "radius_max": 5.5,
            "branch_frame": 5,
            "branch_count": 4,
            "tracked_points": 16,
            "frames": 16,
            "background_cell": 8,
        },
        "data": {"train_worlds": 192, "train_branches": 2, "readout_worlds": 96, "eval_worlds": 32, "seed": 1000},
        "encoders": {
            "variants": ["random-frozen", "pixel-identity", "image-mae", "video-mae"],
            "patch": 8,
            "dim": 64,
            "depth": 4,
            "heads": 4,
            "mlp_ratio": 2,
            "mask_ratio": 0.75,
            "pretrain_steps": {"image-mae": 350, "video-mae": 1000},
            "batch": 8,
            "lr": 2e-3,
            "decoder_depth": 2,
            "seed": 2000,
        },
        "readouts": {"dim": 64, "blocks": 2, "heads": 1, "mlp_ratio": 2, "steps": 450, "batch": 8, "lr": 2e-3, "seed": 3000},
        "forecaster": {
            "dim": 64,
            "depth": 3,
            "heads": 1,
            "mlp_ratio": 4,
            "steps": 1100,
            "batch": 16,
            "lr": 2e-3,
            "schedule_steps": 120,
            "seed": 4000,
            "regression_variants": ["video-mae"],
        },
        "sampling": {"num_samples": 10, "seed": 5000},
    }


def smoke_config() -> dict:
    """A miniature end-to-end configuration for fast integration checks."""
    cfg = default_config()
    cfg["world"].update({"height": 16, "width": 16, "objects": 2, "radius_min": 2.0, "radius_max": 3.5, "tracked_points": 6, "background_cell": 4})
    cfg["data"].update({"train_worlds": 12, "train_branches": 2, "readout_worlds": 8, "eval_worlds": 4})
    cfg["encoders"].update({"variants": ["pixel-identity", "video-mae"], "patch": 4, "dim": 32, "depth": 1, "heads": 2, "pretrain_steps": {"image-mae": 30, "video-mae": 30}, "batch": 2})
    cfg["readouts"].update({"dim": 32, "blocks": 1, "steps": 40, "batch": 4})
    cfg["forecaster"].update({"dim": 32, "depth": 1, "steps": 40, "batch": 8, "schedule_steps": 40})
    cfg["sampling"].update({"num_samples": 3})
    return cfg


def validate_config(config: dict) -> dict:
    jsonschema.validate(config, CONFIG_SCHEMA)
    return config


def load_config(path_or_none: str | None = None, preset: str | None = None) -> dict:
    if path_or_none:
        with open(path_or_none) as f:
            loaded = json.load(f)
        base = smoke_config() if preset == "smoke" else default_config()
        for section, values in loaded.items():
            if isinstance(values, dict):
                base.setdefault(section, {}).update(values)
            else:
                base[section] = values
        return validate_config(base)
    return validate_config(smoke_config() if preset == "smoke" else default_config())


def config_hash(obj) -> str:
    """Content hash of any JSON-serializable object (sorted keys)."""
    payload = json.dumps(obj, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(payload).hexdigest()[:16]


def subconfig(config: dict, *sections: str) -> dict:
    return copy.deepcopy({s: config[s] for s in sections})
