"""Pipeline staging, determinism, isolation contracts, report properties.

Uses the miniature smoke configuration; a shared run directory is built
once per session.
"""

import json
import shutil
from pathlib import Path

import numpy as np
import pytest

from latentcast import numkit as nk
from latentcast.harness import Pipeline, smoke_config, validate_config
from latentcast.harness.pipeline import TRAINING_STAGES
from latentcast.harness.reporting import normalize_scores


@pytest.fixture(scope="module")
def smoke_run(tmp_path_factory):
    run_dir = tmp_path_factory.mktemp("pipeline") / "run"
    manifest = Pipeline(run_dir, smoke_config()).run()
    return run_dir, manifest


def test_config_schema_round_trip():
    cfg = smoke_config()
    assert validate_config(cfg) is cfg
    import jsonschema

    bad = smoke_config()
    bad["sampling"]["num_samples"] = "ten"
    with pytest.raises(jsonschema.ValidationError):
        validate_config(bad)


def test_all_stages_complete(smoke_run):
    _, manifest = smoke_run
    assert set(manifest["stages"]) == {
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
    }


def test_eval_split_never_read_by_training_stages(smoke_run):
    _, manifest = smoke_run
    for stage in TRAINING_STAGES:
        reads = manifest["stages"][stage]["files_read"]
        assert reads, f"stage {stage} recorded no reads"
        offenders = [p for p in reads if p.startswith("data/eval")]
        assert not offenders, f"stage {stage} read eval files: {offenders}"


def test_frozen_artifacts_unchanged_after_pipeline(smoke_run):
    run_dir, _ = smoke_run
    with open(run_dir / "frozen.json") as f:
        frozen = json.load(f)
    for variant, checksum in frozen["encoders"].items():
        assert nk.checkpoint_checksum(run_dir / "encoders" / variant) == checksum


def test_readout_checksums_stable_against_rerun(smoke_run):
    run_dir, manifest = smoke_run
    recorded = manifest["stages"]["train-readouts"]["outputs"]
    for rel, digest in recorded.items():
        assert nk.file_sha256(run_dir / rel) == digest


def test_resume_skips_completed_stages(smoke_run):
    run_dir, manifest = smoke_run
    before = {name: rec["seconds"] for name, rec in manifest["stages"].items()}
    again = Pipeline(run_dir, smoke_config()).run()
    # records unchanged object-for-object implies no stage re-ran
    assert {n: r["seconds"] for n, r in again["stages"].items()} == before


def test_resume_rebuilds_deleted_report_without_retraining(smoke_run):
    run_dir, manifest = smoke_run
    csv_path = run_dir / "report" / "report.csv"
    original = csv_path.read_bytes()
    trained_at = manifest["stages"]["train-forecasters"]["seconds"]
    csv_path.unlink()
    again = Pipeline(run_dir, smoke_config()).run()
    assert csv_path.read_bytes() == original
    assert again["stages"]["train-forecasters"]["seconds"] == trained_at


def test_config_change_invalidates_downstream(tmp_path):
    cfg = smoke_config()
    cfg["data"]["eval_worlds"] = 2
    cfg["sampling"]["num_samples"] = 2
    pipe = Pipeline(tmp_path / "r", cfg)
    pipe.run(until="generate")
    first = pipe.manifest["stages"]["generate"]["hash"]
    cfg2 = json.loads(json.dumps(cfg))
    cfg2["world"]["objects"] = 1
    pipe2 = Pipeline(tmp_path / "r", cfg2)
    pipe2.run(until="generate")
    assert pipe2.manifest["stages"]["generate"]["hash"] != first


def test_report_csv_structure(smoke_run):
    run_dir, _ = smoke_run
    lines = (run_dir / "report" / "report.csv").read_text().splitlines()
    assert lines[0] == "encoder,task,metric,value"
    rows = [line.split(",") for line in lines[1:]]
    keys = {(r[0], r[1], r[2]) for r in rows}
    assert len(keys) == len(rows), "duplicate (encoder, task, metric) rows"
    tasks = {r[1] for r in rows}
    assert tasks == {"pixels", "depth", "points", "boxes"}


def test_report_figures_exist_and_deterministic(smoke_run):
    run_dir, _ = smoke_run
    from latentcast.harness.reporting import write_report

    scatter = (run_dir / "report" / "scatter.svg").read_bytes()
    fd_bars = (run_dir / "report" / "fd_bars.svg").read_bytes()
    assert scatter.startswith(b"<?xml") and fd_bars.startswith(b"<?xml")
    write_report(run_dir, smoke_config())
    assert (run_dir / "report" / "scatter.svg").read_bytes() == scatter
    assert (run_dir / "report" / "fd_bars.svg").read_bytes() == fd_bars


def test_normalization_maps_best_to_one():
    vals = normalize_scores([3.0, 1.0, 2.0])
    assert vals == [1.0, 0.0, 0.5]
    assert normalize_scores([2.0]) == [1.0]


def test_sampler_interface_cannot_see_future():
    import inspect

    from latentcast.forecaster import sample

    names = set(inspect.signature(sample).parameters)
    assert "future" not in names and "ground_truth" not in names
    assert names == {"context", "arrays", "spec", "schedule", "n", "seed"}


def test_correlation_missing_with_single_encoder(tmp_path):
    cfg = smoke_config()
    cfg["encoders"]["variants"] = ["pixel-identity"]
    cfg["forecaster"]["regression_variants"] = []
    cfg["data"].update({"train_worlds": 6, "readout_worlds": 4, "eval_worlds": 2})
    cfg["readouts"]["steps"] = 10
    cfg["forecaster"]["steps"] = 10
    cfg["encoders"]["pretrain_steps"] = {}
    run_dir = tmp_path / "single"
    Pipeline(run_dir, cfg).run()
    with open(run_dir / "report" / "report.json") as f:
        report = json.load(f)
    for task in ("pixels", "depth", "points", "boxes"):
        assert report["correlations"][task]["spearman_rho"] is None
        assert report["correlations"][task]["n"] == 1
