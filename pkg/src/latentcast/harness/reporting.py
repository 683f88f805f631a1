"""Report emission: flat CSV + JSON tables, per-task tables, and figures.

Output is byte-deterministic for a given evaluation: floats are serialized
with repr (shortest round-trip), rows follow fixed orders, and the SVG
figures pin matplotlib's hash salt and strip the date metadata. Missing
metrics stay empty cells; nothing is fabricated.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .. import evalkit as ek
from .evaluate import LOWER_IS_BETTER, TASK_LIST

__all__ = ["write_report", "collect_scores", "normalize_scores"]

AGG_METRICS = ("mean", "std", "min", "max", "best")
EXTRA_METRICS = ("perception", "fd", "variance_pred", "variance_gt")
TASK_COLORS = {"pixels": "#d62728", "depth": "#1f77b4", "points": "#2ca02c", "boxes": "#ff7f0e"}

plt.rcParams["svg.hashsalt"] = "latentcast"


def _fmt(value) -> str:
    if value is None:
        return ""
    return repr(float(value))


def collect_scores(root: Path, config: dict) -> dict:
    """Gather evaluation JSONs into {model_name: {task: metrics}}."""
    scores = {}
    for variant in config["encoders"]["variants"]:
        with open(root / "eval" / f"{variant}.json") as f:
            data = json.load(f)
        for model, tasks in data.items():
            name = variant if model == "diffusion" else f"{variant}-regression"
            scores[name] = tasks
    return scores


def forecast_score(task_metrics: dict) -> float | None:
    """Best-of-N forecasting score (dataset mean of per-example best)."""
    return task_metrics["aggregate"]["best"]


def normalize_scores(values: list[float]) -> list[float]:
    """Min-max normalization mapping the best (largest) value to 1.0."""
    arr = np.asarray(values, dtype=np.float64)
    lo, hi = arr.min(), arr.max()
    if hi == lo:
        return [1.0] * len(values)
    return list((arr - lo) / (hi - lo))


def _correlations(scores: dict, config: dict) -> dict:
    """Per-task perception/forecasting correlation across diffusion models."""
    diffusion_names = [v for v in config["encoders"]["variants"] if v in scores]
    out = {}
    for task in TASK_LIST:
        pairs = []
        for name in diffusion_names:
            t = scores[name][task]
            if t["perception"] is None or forecast_score(t) is None:
                continue
            sign = -1.0 if LOWER_IS_BETTER[task] else 1.0
            pairs.append((sign * t["perception"], sign * forecast_score(t)))
        if len(pairs) >= 3:
            res = ek.correlation([p[0] for p in pairs], [p[1] for p in pairs])
            out[task] = {"pearson_r": res.pearson_r, "spearman_rho": res.spearman_rho, "n": len(pairs)}
        else:
            out[task] = {"pearson_r": None, "spearman_rho": None, "n": len(pairs)}
    return out


def _write_flat_csv(path: Path, scores: dict):
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["encoder", "task", "metric", "value"])
        for name in sorted(scores):
            for task in TASK_LIST:
                t = scores[name].get(task)
                if t is None:
                    continue
                for metric in AGG_METRICS:
                    writer.writerow([name, task, metric, _fmt(t["aggregate"][metric])])
                for metric in EXTRA_METRICS:
                    writer.writerow([name, task, metric, _fmt(t[metric])])


def _write_task_tables(report_dir: Path, scores: dict):
    paths = []
    for task in TASK_LIST:
        path = report_dir / f"table_{task}.csv"
        with open(path, "w", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(["encoder", *AGG_METRICS, *EXTRA_METRICS])
            for name in sorted(scores):
                t = scores[name].get(task)
                if t is None:
                    continue
                row = [name]
                row += [_fmt(t["aggregate"][m]) for m in AGG_METRICS]
                row += [_fmt(t[m]) for m in EXTRA_METRICS]
                writer.writerow(row)
        paths.append(path)
    return paths


def _save_fig(fig, path: Path):
    fig.savefig(path, metadata={"Date": None}, format="svg")
    plt.close(fig)


def _scatter_figure(path: Path, scores: dict, config: dict, correlations: dict):
    fig, ax = plt.subplots(figsize=(5.0, 4.0))
    diffusion_names = [v for v in config["encoders"]["variants"] if v in scores]
    markers = ["o", "s", "^", "D", "v", "P"]
    for task in TASK_LIST:
        pairs = []
        for name in diffusion_names:
            t = scores[name][task]
            if t["perception"] is None or forecast_score(t) is None:
                continue
            sign = -1.0 if LOWER_IS_BETTER[task] else 1.0
            pairs.append((name, sign * t["perception"], sign * forecast_score(t)))
        if not pairs:
            continue
        xs = normalize_scores([p[1] for p in pairs])
        ys = normalize_scores([p[2] for p in pairs])
        rho = correlations[task]["spearman_rho"]
        label = f"{task} (rho={rho:.2f})" if rho is not None else f"{task} (rho: n/a)"
        for (name, _, _), x, y in zip(pairs, xs, ys):
            ax.scatter([x], [y], color=TASK_COLORS[task], marker=markers[diffusion_names.index(name) % len(markers)], s=45)
        ax.plot([], [], color=TASK_COLORS[task], marker="o", linestyle="", label=label)
    for i, name in enumerate(diffusion_names):
        ax.plot([], [], color="gray", marker=markers[i % len(markers)], linestyle="", label=name)
    ax.set_xlabel("perception (normalized, best = 1)")
    ax.set_ylabel("forecasting best-of-N (normalized)")
    ax.set_title("Forecasting tracks perception across frozen encoders")
    ax.legend(fontsize=7, loc="best")
    ax.grid(alpha=0.3)
    fig.tight_layout()
    _save_fig(fig, path)


def _fd_figure(path: Path, scores: dict):
    fig, ax = plt.subplots(figsize=(6.0, 3.5))
    names = sorted(scores)
    width = 0.8 / max(len(names), 1)
    xs = np.arange(len(TASK_LIST))
    for i, name in enumerate(names):
        vals, pos = [], []
        for j, task in enumerate(TASK_LIST):
            t = scores[name].get(task)
            if t and t["fd"] is not None:
                vals.append(t["fd"])
                pos.append(xs[j] + i * width)
        if vals:
            ax.bar(pos, vals, width=width, label=name)
    ax.set_xticks(xs + 0.4 - width / 2)
    ax.set_xticklabels(TASK_LIST)
    ax.set_yscale("log")
    ax.set_ylabel("Frechet distance (log scale)")
    ax.set_title("Distributional alignment of forecasts")
    ax.legend(fontsize=7)
    fig.tight_layout()
    _save_fig(fig, path)


def write_report(root: Path, config: dict):
    """Emit report.csv/json, per-task tables, and SVG figures. Returns paths."""
    root = Path(root)
    report_dir = root / "report"
    report_dir.mkdir(parents=True, exist_ok=True)
    scores = collect_scores(root, config)
    correlations = _correlations(scores, config)

    flat_csv = report_dir / "report.csv"
    _write_flat_csv(flat_csv, scores)
    table_paths = _write_task_tables(report_dir, scores)

    report_json = report_dir / "report.json"
    with open(report_json, "w") as f:
        json.dump({"scores": scores, "correlations": correlations}, f, indent=1, sort_keys=True)

    scatter = report_dir / "scatter.svg"
    _scatter_figure(scatter, scores, config, correlations)
    fd_fig = report_dir / "fd_bars.svg"
    _fd_figure(fd_fig, scores)
    return [flat_csv, report_json, scatter, fd_fig, *table_paths]
