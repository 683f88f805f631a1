"""Dataset persistence: a JSON manifest of seeds plus per-channel tensors.

The manifest stores enough (seeds + config + split) to regenerate any clip;
the tensor files make the stored bytes the authoritative copy.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path

from ..numkit import io as nkio
from .world import Clip, WorldConfig, generate_clip

__all__ = ["Dataset", "DatasetFormatError", "write_dataset", "read_dataset", "regenerate_dataset"]

DATASET_VERSION = 1
_CHANNELS = ("rgb", "depth", "track_xy", "track_vis", "box_xyxy", "box_present")


class DatasetFormatError(IOError):
    """Missing, truncated, or version-mismatched dataset files."""


@dataclass
class Dataset:
    clips: list[Clip]
    split: str
    config: WorldConfig

    @property
    def seeds(self) -> list[tuple[int, int]]:
        return [(c.world_seed, c.branch_seed) for c in self.clips]

    def __len__(self):
        return len(self.clips)


def generate_dataset(seeds: list[tuple[int, int]], config: WorldConfig, split: str) -> Dataset:
    clips = [generate_clip(w, b, config) for w, b in seeds]
    return Dataset(clips=clips, split=split, config=config)


def write_dataset(dataset: Dataset, path) -> None:
    path = Path(path)
    (path / "clips").mkdir(parents=True, exist_ok=True)
    manifest = {
        "dataset_version": DATASET_VERSION,
        "split": dataset.split,
        "config": dataclasses.asdict(dataset.config),
        "clips": [{"world_seed": c.world_seed, "branch_seed": c.branch_seed} for c in dataset.clips],
    }
    manifest["config"]["shapes"] = list(manifest["config"]["shapes"])
    with open(path / "manifest.json", "w") as f:
        json.dump(manifest, f, indent=1, sort_keys=True)
    for i, clip in enumerate(dataset.clips):
        for name, arr in clip.channels().items():
            nkio.save_tensor(path / "clips" / f"{i:05d}.{name}.lten", arr)


def read_manifest(path) -> dict:
    manifest_path = Path(path) / "manifest.json"
    if not manifest_path.exists():
        raise DatasetFormatError(f"{path}: no manifest.json")
    nkio.note_read(manifest_path)
    with open(manifest_path) as f:
        manifest = json.load(f)
    if manifest.get("dataset_version") != DATASET_VERSION:
        raise DatasetFormatError(f"{path}: unsupported dataset version {manifest.get('dataset_version')}")
    return manifest


def _config_from_manifest(manifest: dict) -> WorldConfig:
    raw = dict(manifest["config"])
    raw["shapes"] = tuple(raw["shapes"])
    return WorldConfig(**raw)


def read_dataset(path) -> Dataset:
    path = Path(path)
    manifest = read_manifest(path)
    config = _config_from_manifest(manifest)
    clips = []
    for i, entry in enumerate(manifest["clips"]):
        arrays = {}
        for name in _CHANNELS:
            fpath = path / "clips" / f"{i:05d}.{name}.lten"
            if not fpath.exists():
                raise DatasetFormatError(f"{path}: missing channel file {fpath.name}")
            arrays[name] = nkio.load_tensor(fpath)
        clips.append(Clip(world_seed=int(entry["world_seed"]), branch_seed=int(entry["branch_seed"]), **arrays))
    return Dataset(clips=clips, split=manifest["split"], config=config)


def regenerate_dataset(path) -> Dataset:
    """Rebuild every clip from the manifest seeds alone."""
    manifest = read_manifest(path)
    config = _config_from_manifest(manifest)
    seeds = [(int(e["world_seed"]), int(e["branch_seed"])) for e in manifest["clips"]]
    return generate_dataset(seeds, config, manifest["split"])
