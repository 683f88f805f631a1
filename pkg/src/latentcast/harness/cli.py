"""latentcast command line: dataset generation, stage training, full runs.

Heavy imports happen after thread setup so LATENTCAST_THREADS can cap BLAS
parallelism for the whole process.
"""

from __future__ import annotations

import argparse
import json
import os
import sys


def _setup_threads():
    cap = os.environ.get("LATENTCAST_THREADS")
    if cap:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS", "NUMEXPR_NUM_THREADS"):
            os.environ.setdefault(var, cap)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="latentcast", description="Latent-space video forecasting benchmark")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="JSON config file (partial; merged over the preset)")
        p.add_argument("--preset", choices=["default", "smoke"], default="default")
        p.add_argument("--seed", type=int, help="override the relevant stage seed")
        p.add_argument("--out", help="output directory")

    p = sub.add_parser("generate", help="generate a clip dataset")
    add_common(p)
    p.add_argument("--clips", type=int, default=16)
    p.add_argument("--split", default="custom")

    p = sub.add_parser("train-encoder", help="pretrain or initialize one encoder variant")
    add_common(p)
    p.add_argument("--variant", required=True, choices=["random-frozen", "pixel-identity", "image-mae", "video-mae"])
    p.add_argument("--data", required=True)

    p = sub.add_parser("train-readout", help="train one readout head")
    add_common(p)
    p.add_argument("--task", required=True, choices=["pixels", "depth", "points", "boxes"])
    p.add_argument("--encoder", required=True)
    p.add_argument("--data", required=True)

    p = sub.add_parser("train-forecaster", help="train the latent diffusion forecaster")
    add_common(p)
    p.add_argument("--encoder", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--regression", action="store_true", help="train the deterministic regression baseline instead")

    p = sub.add_parser("sample", help="sample future latent trajectories")
    add_common(p)
    p.add_argument("--forecaster", required=True)
    p.add_argument("--encoder", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--n", type=int, default=10)

    p = sub.add_parser("evaluate", help="run perception + forecasting evaluation inside a run dir")
    add_common(p)
    p.add_argument("--run", required=True)

    p = sub.add_parser("report", help="emit tables and figures for a finished run")
    add_common(p)
    p.add_argument("--run", required=True)

    p = sub.add_parser("run", help="execute the full pipeline")
    add_common(p)
    p.add_argument(
        "--until",
        choices=[
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
        ],
        help="stop after this stage",
    )

    p = sub.add_parser("schema", help="print the JSON config schema")
    return parser


def _load_cfg(args):
    from .config import load_config

    return load_config(getattr(args, "config", None), preset=getattr(args, "preset", "default"))


def _require_out(args) -> str:
    if not args.out:
        print("error: --out is required", file=sys.stderr)
        raise SystemExit(2)
    return args.out


def cmd_generate(args):
    from ..synthworld import WorldConfig, generate_dataset, write_dataset

    cfg = _load_cfg(args)
    raw = dict(cfg["world"])
    raw["shapes"] = tuple(raw["shapes"])
    world = WorldConfig(**raw).validate()
    seed = args.seed if args.seed is not None else cfg["data"]["seed"]
    dataset = generate_dataset([(seed + i, 0) for i in range(args.clips)], world, split=args.split)
    write_dataset(dataset, _require_out(args))
    print(f"wrote {args.clips} clips to {args.out}")


def cmd_train_encoder(args):
    import dataclasses

    from .. import numkit as nk
    from ..backbones import PretrainSettings, init_encoder_arrays, pretrain_encoder
    from ..synthworld import read_dataset
    from .pipeline import Pipeline

    cfg = _load_cfg(args)
    dataset = read_dataset(args.data)
    pipe = Pipeline.__new__(Pipeline)
    pipe.config = cfg
    spec = pipe._encoder_spec(args.variant)
    if args.seed is not None:
        spec = dataclasses.replace(spec, seed=args.seed)
    if args.variant in ("image-mae", "video-mae"):
        enc = cfg["encoders"]
        result = pretrain_encoder(dataset, spec, PretrainSettings(batch=enc.get("batch", 8), lr=enc.get("lr", 2e-3), decoder_depth=enc.get("decoder_depth", 2)))
        arrays = result.arrays
        meta = {"spec": dataclasses.asdict(spec), "loss_first": result.initial_loss, "loss_final": result.final_loss}
        print(f"pretrain loss {result.initial_loss:.4f} -> {result.final_loss:.4f}")
    else:
        arrays = init_encoder_arrays(spec, dataset.config.height, dataset.config.width)
        meta = {"spec": dataclasses.asdict(spec)}
    nk.save_checkpoint(_require_out(args), arrays, meta=meta)
    print(f"saved encoder checkpoint to {args.out}")


def _load_encoder(path):
    import dataclasses

    from .. import numkit as nk
    from ..backbones import EncoderSpec

    arrays, meta = nk.load_checkpoint(path)
    return arrays, EncoderSpec(**meta["spec"])


def cmd_train_readout(args):
    import dataclasses

    import numpy as np

    from .. import numkit as nk
    from ..backbones import encode
    from ..readouts import ReadoutSettings, train_readout
    from ..synthworld import read_dataset

    cfg = _load_cfg(args)["readouts"]
    dataset = read_dataset(args.data)
    arrays, spec = _load_encoder(args.encoder)
    latents = [encode(c, arrays, spec, encoder_id=spec.variant) for c in dataset.clips]
    settings = ReadoutSettings(
        steps=cfg.get("steps", 400),
        batch=cfg.get("batch", 8),
        lr=cfg.get("lr", 2e-3),
        dim=cfg.get("dim", 64),
        blocks=cfg.get("blocks", 2),
        heads=cfg.get("heads", 1),
        mlp_ratio=cfg.get("mlp_ratio", 2),
        seed=args.seed if args.seed is not None else cfg["seed"],
    )
    head = train_readout(latents, dataset.clips, args.task, settings)
    meta = {
        "config": dataclasses.asdict(head.config),
        "encoder_id": head.encoder_id,
        "trained": head.trained,
        "loss_first": head.loss_trace[0],
        "loss_final": float(np.mean(head.loss_trace[-10:])),
    }
    nk.save_checkpoint(_require_out(args), head.arrays, meta=meta)
    print(f"readout loss {meta['loss_first']:.5f} -> {meta['loss_final']:.5f}; saved to {args.out}")


def cmd_train_forecaster(args):
    import dataclasses

    from .. import numkit as nk
    from ..backbones import compute_norm_stats, encode, normalize
    from ..forecaster import DenoiserSpec, NoiseSchedule, TrainSettings, split_context_future, train_diffusion, train_regression
    from ..synthworld import read_dataset

    cfg = _load_cfg(args)["forecaster"]
    dataset = read_dataset(args.data)
    arrays, spec = _load_encoder(args.encoder)
    latents = [encode(c, arrays, spec, encoder_id=spec.variant) for c in dataset.clips]
    stats = compute_norm_stats(latents)
    context, future = split_context_future([normalize(t, stats) for t in latents])
    dspec = DenoiserSpec(
        latent_dim=spec.dim,
        tokens_per_frame=spec.tokens_per_frame(dataset.config.height, dataset.config.width),
        frames=dataset.config.frames,
        dim=cfg.get("dim", 64),
        depth=cfg.get("depth", 3),
        heads=cfg.get("heads", 1),
        mlp_ratio=cfg.get("mlp_ratio", 4),
        schedule_steps=cfg.get("schedule_steps", 200),
        seed=args.seed if args.seed is not None else cfg["seed"],
    )
    settings = TrainSettings(steps=cfg.get("steps", 1200), batch=cfg.get("batch", 16), lr=cfg.get("lr", 2e-3), seed=dspec.seed)
    if args.regression:
        result = train_regression(context, future, dspec, settings)
    else:
        result = train_diffusion(context, future, dspec, NoiseSchedule(steps=dspec.schedule_steps), settings)
    tensors = dict(result.arrays)
    tensors["norm_mean"] = stats.mean
    tensors["norm_std"] = stats.std
    meta = {"spec": dataclasses.asdict(dspec), "regression": bool(args.regression), "loss_final": result.final_loss}
    nk.save_checkpoint(_require_out(args), tensors, meta=meta)
    print(f"forecaster final loss {result.final_loss:.4f}; saved to {args.out}")


def cmd_sample(args):
    import numpy as np

    from .. import numkit as nk
    from ..backbones import NormStats, encode, normalize
    from ..forecaster import CONTEXT_FRAMES, DenoiserSpec, LatentBatch, NoiseSchedule, regress, sample
    from ..synthworld import read_dataset

    dataset = read_dataset(args.data)
    enc_arrays, spec = _load_encoder(args.encoder)
    tensors, meta = nk.load_checkpoint(args.forecaster)
    stats = NormStats(mean=tensors.pop("norm_mean"), std=tensors.pop("norm_std"))
    dspec = DenoiserSpec(**meta["spec"])
    latents = [normalize(encode(c, enc_arrays, spec, encoder_id=spec.variant), stats) for c in dataset.clips]
    ctx = LatentBatch(tokens=np.stack([t.tokens[:CONTEXT_FRAMES] for t in latents]), normalized=True)
    out_dir = _require_out(args)
    os.makedirs(out_dir, exist_ok=True)
    seed = args.seed if args.seed is not None else 0
    if meta.get("regression"):
        arr = regress(ctx, tensors, dspec)
        nk.save_tensor(os.path.join(out_dir, "samples.regression.lten"), arr)
        print(f"wrote 1 regression trajectory per example for {len(dataset)} examples")
    else:
        sets = sample(ctx, tensors, dspec, NoiseSchedule(steps=dspec.schedule_steps), n=args.n, seed=seed)
        nk.save_tensor(os.path.join(out_dir, "samples.lten"), np.stack([s.samples for s in sets]))
        print(f"wrote {args.n} samples per example for {len(dataset)} examples")


def cmd_evaluate(args):
    from .pipeline import Pipeline

    cfg = _load_cfg(args)
    pipe = Pipeline(args.run, cfg)
    pipe.run(until="evaluate")
    print(f"evaluation artifacts in {args.run}/eval")


def cmd_report(args):
    from .pipeline import Pipeline

    cfg = _load_cfg(args)
    pipe = Pipeline(args.run, cfg)
    pipe.run(until="report")
    print(f"report written to {args.run}/report")


def cmd_run(args):
    from .pipeline import Pipeline

    cfg = _load_cfg(args)
    manifest = Pipeline(_require_out(args), cfg).run(until=args.until)
    timings = {name: rec["seconds"] for name, rec in manifest["stages"].items()}
    print(json.dumps({"stages": timings}, indent=1))
    if args.until in (None, "report"):
        print(f"run complete: {args.out}/report/report.csv")


def cmd_schema(_args):
    from .config import CONFIG_SCHEMA

    print(json.dumps(CONFIG_SCHEMA, indent=1, sort_keys=True))


def main(argv=None):
    _setup_threads()
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "generate": cmd_generate,
        "train-encoder": cmd_train_encoder,
        "train-readout": cmd_train_readout,
        "train-forecaster": cmd_train_forecaster,
        "sample": cmd_sample,
        "evaluate": cmd_evaluate,
        "report": cmd_report,
        "run": cmd_run,
        "schema": cmd_schema,
    }
    handlers[args.command](args)


if __name__ == "__main__":
    main()
