"""Experiment pipeline: staged, content-addressed, resumable, audited.

Stages run in a fixed order; each stage's identity is a hash of its config
slice plus its upstream hashes. A completed stage whose hash matches and
whose outputs still exist is skipped on resume. Every artifact read goes
through the tensor-io layer and is recorded per stage in the run manifest,
which is what the eval-split isolation audit inspects. Frozen artifacts
(encoders after the freeze stage, readouts after training) are checksummed
so later stages can be proven not to touch them.
"""

from __future__ import annotations

import dataclasses
import json
import time
from pathlib import Path

import numpy as np

from .. import backbones as bb
from .. import forecaster as fc
from .. import numkit as nk
from .. import readouts as ro
from .. import synthworld as sw
from . import evaluate as ev
from .config import config_hash, subconfig, validate_config
from .reporting import write_report

__all__ = ["STAGES", "TRAINING_STAGES", "run_pipeline", "Pipeline"]

STAGES = (
    "generate",
    "train-encoders",
    "freeze",
    "train-readouts",
    "perception-eval",
    "norm-stats",
    "train-forecasters",
    "sample",
    "decode",
    "evaluate",
    "report",
)
# stages that fit parameters; these must never read an eval-split file
TRAINING_STAGES = ("train-encoders", "train-readouts", "norm-stats", "train-forecasters")

TASKS = ev.TASK_LIST


class StageFailure(RuntimeError):
    pass


def _relpath(path: str, root: Path) -> str:
    try:
        return str(Path(path).resolve().relative_to(root.resolve()))
    except ValueError:
        return str(path)


class Pipeline:
    def __init__(self, run_dir, config: dict):
        self.root = Path(run_dir)
        self.config = validate_config(json.loads(json.dumps(config)))
        self.root.mkdir(parents=True, exist_ok=True)
        self.manifest_path = self.root / "manifest.json"
        self.manifest = {"config": self.config, "stages": {}}
        if self.manifest_path.exists():
            with open(self.manifest_path) as f:
                previous = json.load(f)
            if previous.get("config") == self.config:
                self.manifest = previous
            else:
                self.manifest = {"config": self.config, "stages": {}}
        with open(self.root / "config.json", "w") as f:
            json.dump(self.config, f, indent=1, sort_keys=True)
        self._hashes: dict[str, str] = {}

    # -- manifest helpers ---------------------------------------------------
    def _save_manifest(self):
        with open(self.manifest_path, "w") as f:
            json.dump(self.manifest, f, indent=1, sort_keys=True)

    def _outputs_exist(self, record: dict) -> bool:
        return all((self.root / rel).exists() for rel in record.get("outputs", {}))

    def _run_stage(self, name: str, stage_hash: str, fn):
        self._hashes[name] = stage_hash
        record = self.manifest["stages"].get(name)
        if record and record.get("hash") == stage_hash and self._outputs_exist(record):
            return
        reads: list[str] = []
        listener = nk.register_read_listener(lambda p: reads.append(p))
        started = time.perf_counter()
        try:
            outputs = fn()
        except Exception:
            self.manifest["stages"].pop(name, None)
            self._save_manifest()
            raise
        finally:
            nk.unregister_read_listener(listener)
        out_records = {}
        for path in sorted(set(map(str, outputs))):
            rel = _relpath(path, self.root)
            out_records[rel] = nk.file_sha256(path) if Path(path).is_file() else "dir"
        self.manifest["stages"][name] = {
            "hash": stage_hash,
            "seconds": round(time.perf_counter() - started, 3),
            "outputs": out_records,
            "files_read": sorted({_relpath(p, self.root) for p in reads}),
        }
        self._save_manifest()

    # -- shared loaders -----------------------------------------------------
    def _world_config(self) -> sw.WorldConfig:
        raw = dict(self.config["world"])
        raw["shapes"] = tuple(raw["shapes"])
        return sw.WorldConfig(**raw).validate()

    def _encoder_spec(self, variant: str) -> bb.EncoderSpec:
        enc = self.config["encoders"]
        steps = enc.get("pretrain_steps", {}).get(variant, 0)
        return bb.EncoderSpec(
            variant=variant,
            patch=enc.get("patch", 8),
            dim=enc.get("dim", 64),
            depth=enc.get("depth", 4),
            heads=enc.get("heads", 4),
            mlp_ratio=enc.get("mlp_ratio", 2),
            mask_ratio=enc.get("mask_ratio", 0.75),
            pretrain_steps=steps,
            seed=enc["seed"] + list(self.config["encoders"]["variants"]).index(variant),
        )

    def _denoiser_spec(self, world: sw.WorldConfig, variant: str) -> fc.DenoiserSpec:
        f = self.config["forecaster"]
        enc = self._encoder_spec(variant)
        return fc.DenoiserSpec(
            latent_dim=enc.dim,
            tokens_per_frame=enc.tokens_per_frame(world.height, world.width),
            frames=world.frames,
            dim=f.get("dim", 64),
            depth=f.get("depth", 3),
            heads=f.get("heads", 1),
            mlp_ratio=f.get("mlp_ratio", 4),
            schedule_steps=f.get("schedule_steps", 200),
            seed=f["seed"] + list(self.config["encoders"]["variants"]).index(variant),
        )

    def _dataset(self, split: str) -> sw.Dataset:
        return sw.read_dataset(self.root / "data" / split)

    def _encoder_arrays(self, variant: str):
        arrays, meta = nk.load_checkpoint(self.root / "encoders" / variant)
        return arrays, meta

    def _encode_dataset(self, dataset: sw.Dataset, variant: str) -> list[bb.LatentTrajectory]:
        arrays, _ = self._encoder_arrays(variant)
        spec = self._encoder_spec(variant)
        return [bb.encode(clip, arrays, spec, encoder_id=variant) for clip in dataset.clips]

    def _load_head(self, variant: str, task: str) -> ro.ReadoutHead:
        arrays, meta = nk.load_checkpoint(self.root / "readouts" / variant / task)
        cfg = ro.ReadoutConfig(**meta["config"])
        return ro.ReadoutHead(config=cfg, arrays=arrays, encoder_id=meta["encoder_id"], trained=meta["trained"])

    def _load_stats(self, variant: str) -> bb.NormStats:
        arrays, _ = nk.load_checkpoint(self.root / "stats" / variant)
        return bb.NormStats(mean=arrays["mean"], std=arrays["std"])

    # -- stages ---------------------------------------------------------------
    def stage_generate(self):
        world = self._world_config()
        data = self.config["data"]
        base = int(data["seed"])
        branches = int(data.get("train_branches", 2))
        outputs = []
        specs = {
            "train": [(base + w, b) for w in range(data["train_worlds"]) for b in range(branches)],
            "readout": [(base + 100_000 + w, 0) for w in range(data["readout_worlds"])],
            "eval": [(base + 200_000 + w, w) for w in range(data["eval_worlds"])],
        }
        for split, seeds in specs.items():
            ds = sw.generate_dataset(seeds, world, split=split)
            path = self.root / "data" / split
            sw.write_dataset(ds, path)
            outputs.append(path / "manifest.json")
        return outputs

    def stage_train_encoders(self):
        world = self._world_config()
        enc_cfg = self.config["encoders"]
        outputs = []
        train = None
        for variant in enc_cfg["variants"]:
            spec = self._encoder_spec(variant)
            if variant in ("image-mae", "video-mae"):
                if train is None:
                    train = self._dataset("train")
                settings = bb.PretrainSettings(
                    batch=enc_cfg.get("batch", 8),
                    lr=enc_cfg.get("lr", 2e-3),
                    decoder_depth=enc_cfg.get("decoder_depth", 2),
                )
                result = bb.pretrain_encoder(train, spec, settings)
                arrays = result.arrays
                meta = {"spec": dataclasses.asdict(spec), "loss_first": result.initial_loss, "loss_final": result.final_loss}
            else:
                arrays = bb.init_encoder_arrays(spec, world.height, world.width)
                meta = {"spec": dataclasses.asdict(spec)}
            ckpt = self.root / "encoders" / variant
            nk.save_checkpoint(ckpt, arrays, meta=meta)
            outputs.append(ckpt / "manifest.json")
        return outputs

    def stage_freeze(self):
        checksums = {v: nk.checkpoint_checksum(self.root / "encoders" / v) for v in self.config["encoders"]["variants"]}
        path = self.root / "frozen.json"
        with open(path, "w") as f:
            json.dump({"encoders": checksums}, f, indent=1, sort_keys=True)
        return [path]

    def stage_train_readouts(self):
        ro_cfg = self.config["readouts"]
        dataset = self._dataset("readout")
        outputs = []
        for vi, variant in enumerate(self.config["encoders"]["variants"]):
            latents = self._encode_dataset(dataset, variant)
            for ti, task in enumerate(TASKS):
                settings = ro.ReadoutSettings(
                    steps=ro_cfg.get("steps", 400),
                    batch=ro_cfg.get("batch", 8),
                    lr=ro_cfg.get("lr", 2e-3),
                    dim=ro_cfg.get("dim", 64),
                    blocks=ro_cfg.get("blocks", 2),
                    heads=ro_cfg.get("heads", 1),
                    mlp_ratio=ro_cfg.get("mlp_ratio", 2),
                    seed=ro_cfg["seed"] + 10 * vi + ti,
                )
                head = ro.train_readout(latents, dataset.clips, task, settings)
                ckpt = self.root / "readouts" / variant / task
                meta = {
                    "config": dataclasses.asdict(head.config),
                    "encoder_id": head.encoder_id,
                    "trained": head.trained,
                    "loss_first": head.loss_trace[0],
                    "loss_final": float(np.mean(head.loss_trace[-10:])),
                }
                nk.save_checkpoint(ckpt, head.arrays, meta=meta)
                outputs.append(ckpt / "manifest.json")
        return outputs

    def stage_perception_eval(self):
        dataset = self._dataset("eval")
        queries = [ev.queries_for_clip(c) for c in dataset.clips]
        outputs = []
        for variant in self.config["encoders"]["variants"]:
            latents = self._encode_dataset(dataset, variant)
            scores: dict[str, list] = {}
            for task in TASKS:
                head = self._load_head(variant, task)
                decoded = ev.decode_samples(latents, head, queries)
                scores[task] = [ev.sample_metric(task, out, clip) for out, clip in zip(decoded, dataset.clips)]
            path = self.root / "eval" / f"perception_{variant}.json"
            path.parent.mkdir(parents=True, exist_ok=True)
            with open(path, "w") as f:
                json.dump(scores, f, indent=1, sort_keys=True)
            outputs.append(path)
        return outputs

    def stage_norm_stats(self):
        dataset = self._dataset("train")
        outputs = []
        for variant in self.config["encoders"]["variants"]:
            latents = self._encode_dataset(dataset, variant)
            stats = bb.compute_norm_stats(latents)
            ckpt = self.root / "stats" / variant
            nk.save_checkpoint(ckpt, {"mean": stats.mean, "std": stats.std}, meta={"clips": len(latents)})
            outputs.append(ckpt / "manifest.json")
        return outputs

    def stage_train_forecasters(self):
        world = self._world_config()
        f_cfg = self.config["forecaster"]
        dataset = self._dataset("train")
        schedule = fc.NoiseSchedule(steps=f_cfg.get("schedule_steps", 200)).check_terminal()
        outputs = []
        for vi, variant in enumerate(self.config["encoders"]["variants"]):
            stats = self._load_stats(variant)
            latents = [bb.normalize(t, stats) for t in self._encode_dataset(dataset, variant)]
            context, future = fc.split_context_future(latents)
            spec = self._denoiser_spec(world, variant)
            settings = fc.TrainSettings(
                steps=f_cfg.get("steps", 1200),
                batch=f_cfg.get("batch", 16),
                lr=f_cfg.get("lr", 2e-3),
                seed=f_cfg["seed"] + vi,
            )
            result = fc.train_diffusion(context, future, spec, schedule, settings)
            ckpt = self.root / "forecasters" / variant
            meta = {"spec": dataclasses.asdict(spec), "loss_first": result.loss_trace[0], "loss_final": result.final_loss}
            nk.save_checkpoint(ckpt, result.arrays, meta=meta)
            outputs.append(ckpt / "manifest.json")
            if variant in f_cfg.get("regression_variants", []):
                reg_settings = dataclasses.replace(settings, seed=settings.seed + 500)
                reg = fc.train_regression(context, future, spec, reg_settings)
                ckpt = self.root / "regressors" / variant
                nk.save_checkpoint(ckpt, reg.arrays, meta={"spec": dataclasses.asdict(spec), "loss_final": reg.final_loss})
                outputs.append(ckpt / "manifest.json")
        return outputs

    def _context_batch(self, dataset: sw.Dataset, variant: str, stats: bb.NormStats):
        latents = self._encode_dataset(dataset, variant)
        normed = [bb.normalize(t, stats) for t in latents]
        tokens = np.stack([t.tokens[: fc.CONTEXT_FRAMES] for t in normed]).astype(np.float32)
        return latents, fc.LatentBatch(tokens=tokens, normalized=True)

    def stage_sample(self):
        world = self._world_config()
        s_cfg = self.config["sampling"]
        f_cfg = self.config["forecaster"]
        dataset = self._dataset("eval")
        schedule = fc.NoiseSchedule(steps=f_cfg.get("schedule_steps", 200))
        outputs = []
        for vi, variant in enumerate(self.config["encoders"]["variants"]):
            stats = self._load_stats(variant)
            _, context = self._context_batch(dataset, variant, stats)
            spec = self._denoiser_spec(world, variant)
            arrays, _ = nk.load_checkpoint(self.root / "forecasters" / variant)
            sets = fc.sample(context, arrays, spec, schedule, n=s_cfg.get("num_samples", 10), seed=s_cfg["seed"] + vi)
            stacked = np.stack([s.samples for s in sets])  # [B, n, 12, N, D]
            path = self.root / "samples" / f"{variant}.lten"
            nk.save_tensor(path, stacked)
            outputs.append(path)
            if variant in f_cfg.get("regression_variants", []):
                reg_arrays, _ = nk.load_checkpoint(self.root / "regressors" / variant)
                reg = fc.regress(context, reg_arrays, spec)  # [B, 12, N, D]
                path = self.root / "samples" / f"{variant}.regression.lten"
                nk.save_tensor(path, reg)
                outputs.append(path)
        return outputs

    def _decoded_dir(self, variant: str, model: str) -> Path:
        return self.root / "decoded" / variant / model

    def stage_decode(self):
        dataset = self._dataset("eval")
        queries = [ev.queries_for_clip(c) for c in dataset.clips]
        f_cfg = self.config["forecaster"]
        outputs = []
        for variant in self.config["encoders"]["variants"]:
            stats = self._load_stats(variant)
            real_latents = self._encode_dataset(dataset, variant)
            models = {"diffusion": nk.load_tensor(self.root / "samples" / f"{variant}.lten")}
            if variant in f_cfg.get("regression_variants", []):
                models["regression"] = nk.load_tensor(self.root / "samples" / f"{variant}.regression.lten")[:, None]
            for model, samples in models.items():
                b, n = samples.shape[:2]
                trajs, q_list = [], []
                for i in range(b):
                    ctx_raw = real_latents[i].tokens[: fc.CONTEXT_FRAMES]
                    for j in range(n):
                        denorm = samples[i, j] * stats.std + stats.mean
                        tokens = np.concatenate([ctx_raw, denorm.astype(np.float32)], axis=0)
                        trajs.append(bb.LatentTrajectory(tokens=tokens, encoder_id=variant, source="forecast"))
                        q_list.append(queries[i])
                for task in TASKS:
                    head = self._load_head(variant, task)
                    decoded = ev.decode_samples(trajs, head, q_list)
                    out_dir = self._decoded_dir(variant, model)
                    outputs.extend(_save_outputs(out_dir, task, decoded, b, n))
        return outputs

    def stage_evaluate(self):
        dataset = self._dataset("eval")
        f_cfg = self.config["forecaster"]
        outputs = []
        for variant in self.config["encoders"]["variants"]:
            with open(self.root / "eval" / f"perception_{variant}.json") as f:
                perception = json.load(f)
            models = ["diffusion"]
            if variant in f_cfg.get("regression_variants", []):
                models.append("regression")
            result = {}
            for model in models:
                tasks_json = {}
                box_outputs = None
                for task in TASKS:
                    decoded = _load_outputs(self._decoded_dir(variant, model), task)
                    evaluation = ev.evaluate_task(task, decoded, perception[task], dataset.clips)
                    tasks_json[task] = evaluation.to_json()
                    if task == "boxes":
                        box_outputs = decoded
                    pv = ev.pred_vectors(task, [o for outs in decoded for o in outs])
                    if pv:
                        vec_path = self.root / "eval" / "vectors" / f"{variant}.{model}.{task}.lten"
                        nk.save_tensor(vec_path, np.stack([v.values for v in pv]).astype(np.float32))
                        outputs.append(vec_path)
                tasks_json["diversity_frac"] = ev.diversity_fraction(box_outputs)
                result[model] = tasks_json
            path = self.root / "eval" / f"{variant}.json"
            with open(path, "w") as f:
                json.dump(result, f, indent=1, sort_keys=True)
            outputs.append(path)
        # export ground-truth trajectory vectors for external analysis
        for task in TASKS:
            gv = ev.gt_vectors(task, dataset.clips)
            if gv:
                vec_path = self.root / "eval" / "vectors" / f"gt.{task}.lten"
                nk.save_tensor(vec_path, np.stack([v.values for v in gv]).astype(np.float32))
                outputs.append(vec_path)
        return outputs

    def stage_report(self):
        return write_report(self.root, self.config)

    # -- driver ---------------------------------------------------------------
    def run(self, until: str | None = None) -> dict:
        world_data = subconfig(self.config, "world", "data")
        h = {}
        h["generate"] = config_hash({"cfg": world_data})
        h["train-encoders"] = config_hash({"cfg": self.config["encoders"], "up": h["generate"]})
        h["freeze"] = config_hash({"up": h["train-encoders"]})
        h["train-readouts"] = config_hash({"cfg": self.config["readouts"], "up": h["freeze"]})
        h["perception-eval"] = config_hash({"up": h["train-readouts"]})
        h["norm-stats"] = config_hash({"up": h["freeze"]})
        h["train-forecasters"] = config_hash({"cfg": self.config["forecaster"], "up": h["norm-stats"]})
        h["sample"] = config_hash({"cfg": self.config["sampling"], "up": h["train-forecasters"]})
        h["decode"] = config_hash({"up": [h["sample"], h["train-readouts"]]})
        h["evaluate"] = config_hash({"up": [h["decode"], h["perception-eval"]]})
        h["report"] = config_hash({"up": h["evaluate"]})
        fns = {
            "generate": self.stage_generate,
            "train-encoders": self.stage_train_encoders,
            "freeze": self.stage_freeze,
            "train-readouts": self.stage_train_readouts,
            "perception-eval": self.stage_perception_eval,
            "norm-stats": self.stage_norm_stats,
            "train-forecasters": self.stage_train_forecasters,
            "sample": self.stage_sample,
            "decode": self.stage_decode,
            "evaluate": self.stage_evaluate,
            "report": self.stage_report,
        }
        for name in STAGES:
            self._run_stage(name, h[name], fns[name])
            if until and name == until:
                break
        return self.manifest


def _save_outputs(out_dir: Path, task: str, decoded: list, b: int, n: int):
    """Stack per-(example, sample) task outputs into LTEN files."""
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []

    def save(name, arrays):
        arr = np.stack(arrays).reshape(b, n, *arrays[0].shape)
        path = out_dir / f"{task}.{name}.lten"
        nk.save_tensor(path, arr.astype(np.float32))
        paths.append(path)

    if task == "pixels":
        save("frames", [o.pixels for o in decoded])
    elif task == "depth":
        save("frames", [o.depth for o in decoded])
    elif task == "points":
        save("xy", [o.points_xy for o in decoded])
        save("vis", [o.points_vis_logit for o in decoded])
        save("unc", [o.points_unc_logit for o in decoded])
    elif task == "boxes":
        save("xyxy", [o.boxes for o in decoded])
    return paths


def _load_outputs(out_dir: Path, task: str) -> list[list[ev.TaskOutput]]:
    """Inverse of _save_outputs: [example][sample] TaskOutput lists."""
    from ..readouts import TaskOutput

    def load(name):
        return nk.load_tensor(out_dir / f"{task}.{name}.lten")

    outputs: list[list[ev.TaskOutput]] = []
    if task in ("pixels", "depth"):
        arr = load("frames")
        for i in range(arr.shape[0]):
            outputs.append([TaskOutput(task=task, **{task: arr[i, j]}) for j in range(arr.shape[1])])
    elif task == "points":
        xy, vis, unc = load("xy"), load("vis"), load("unc")
        for i in range(xy.shape[0]):
            outputs.append(
                [
                    TaskOutput(task=task, points_xy=xy[i, j], points_vis_logit=vis[i, j], points_unc_logit=unc[i, j])
                    for j in range(xy.shape[1])
                ]
            )
    else:
        arr = load("xyxy")
        for i in range(arr.shape[0]):
            outputs.append([TaskOutput(task=task, boxes=arr[i, j]) for j in range(arr.shape[1])])
    return outputs


def run_pipeline(config: dict, out_dir) -> dict:
    """Execute every stage; returns the run manifest."""
    return Pipeline(out_dir, config).run()
