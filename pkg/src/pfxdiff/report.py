"""Rendering of evaluation reports, training curves, and schedule plots.

Every render function writes machine-readable output (CSV or JSON) next to the
matplotlib figures so results can be diffed as text and eyeballed as pictures.
"""
from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .metrics import EvalReport, RecordResult
from .schedule import Schedule, dump_schedule


def format_report(report: EvalReport) -> str:
    rows = [
        ("records", f"{report.n_records}"),
        ("candidates per record", f"{report.n_candidates}"),
        ("eval steps", f"{report.eval_steps}"),
        ("bleu-1", f"{report.bleu1:.4f}"),
        ("bleu-3", f"{report.bleu3:.4f}"),
        ("dist-2", f"{report.dist2:.4f}"),
        ("dist-3", f"{report.dist3:.4f}"),
        ("vocab usage %", f"{report.voc_usage:.2f}"),
        ("mean similarity", f"{report.mean_similarity:.4f}"),
    ]
    width = max(len(name) for name, _ in rows)
    return "\n".join(f"{name.ljust(width)}  {value}" for name, value in rows)


def render_eval_report(
    report: EvalReport,
    results: Sequence[RecordResult],
    out_dir: str | Path,
) -> list[Path]:
    """Write report.json, selections.csv, and the two distribution figures."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []

    json_path = out_dir / "report.json"
    json_path.write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    written.append(json_path)

    csv_path = out_dir / "selections.csv"
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "similarity", "caption"])
        for res in results:
            writer.writerow([res.record_id, f"{res.score:.6f}", res.caption])
    written.append(csv_path)

    scores = [res.score for res in results]
    lengths = [len(res.caption.split()) for res in results]

    fig, axes = plt.subplots(1, 2, figsize=(9, 3.5))
    axes[0].hist(scores, bins=20, color="#4878cf", edgecolor="black")
    axes[0].set_xlabel("selected similarity")
    axes[0].set_ylabel("records")
    axes[1].hist(lengths, bins=range(0, max(lengths) + 2), color="#6acc65", edgecolor="black")
    axes[1].set_xlabel("selected caption length (words)")
    axes[1].set_ylabel("records")
    fig.tight_layout()
    fig_path = out_dir / "eval_distributions.png"
    fig.savefig(fig_path, dpi=110)
    plt.close(fig)
    written.append(fig_path)
    return written


def render_training_curve(log_path: str | Path, out_path: str | Path) -> Path:
    steps = []
    losses = []
    with open(log_path, newline="") as fh:
        for row in csv.DictReader(fh):
            steps.append(int(row["step"]))
            losses.append(float(row["loss"]))
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.plot(steps, losses, linewidth=0.8)
    ax.set_xlabel("step")
    ax.set_ylabel("loss")
    ax.set_yscale("log")
    fig.tight_layout()
    out_path = Path(out_path)
    fig.savefig(out_path, dpi=110)
    plt.close(fig)
    return out_path


def render_schedule(sched: Schedule, csv_path: str | Path, fig_path: str | Path | None = None) -> list[Path]:
    """Write the schedule CSV and, optionally, a beta / alpha_bar figure."""
    csv_path = Path(csv_path)
    csv_path.write_text(dump_schedule(sched), encoding="utf-8")
    written = [csv_path]
    if fig_path is not None:
        t = range(1, sched.timesteps + 1)
        fig, axes = plt.subplots(1, 2, figsize=(9, 3.5))
        axes[0].plot(t, sched.beta)
        axes[0].set_xlabel("t")
        axes[0].set_ylabel("beta")
        axes[1].plot(t, sched.alpha_bar)
        axes[1].set_xlabel("t")
        axes[1].set_ylabel("alpha_bar")
        axes[1].set_yscale("log")
        fig.suptitle(sched.kind)
        fig.tight_layout()
        fig_path = Path(fig_path)
        fig.savefig(fig_path, dpi=110)
        plt.close(fig)
        written.append(fig_path)
    return written
