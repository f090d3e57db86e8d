"""Rendering of evaluation reports: aligned text tables, delimited files,
key-value metrics, and matplotlib figures saved next to them.

render_tables is a pure function of its inputs (no timestamps), so identical
reports produce byte-identical artifacts.
"""

from __future__ import annotations

import io
import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .bench import BenchResult
from .data import atomic_write_bytes
from .evaluate import EvalReport
from .model import FLOP_CONVENTION
from .train import TrainLog

PAPER_FLOPS_NOTE = (
    "reference implementations have reported 45040 FLOPs for the 2-feature, "
    "128-step configuration under an undisclosed convention; the number above "
    "uses the convention stated in flop_convention and is not comparable"
)


def _aligned(rows: list[list[str]]) -> str:
    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
    lines = ["  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip()
             for row in rows]
    return "\n".join(lines)


def per_snr_tsv(report: EvalReport) -> str:
    lines = ["snr_db\taccuracy\tcount"]
    for snr in sorted(report.per_snr_accuracy):
        acc, count = report.per_snr_accuracy[snr]
        lines.append(f"{snr}\t{acc:.6f}\t{count}")
    return "\n".join(lines) + "\n"


def confusion_csv(report: EvalReport) -> str:
    names = report.class_names
    out = io.StringIO()
    out.write("true\\pred," + ",".join(names) + "\n")
    for i, name in enumerate(names):
        row = ",".join(str(int(v)) for v in report.confusion[i])
        out.write(f"{name},{row}\n")
    return out.getvalue()


def metrics_kv(report: EvalReport, bench: BenchResult | None = None) -> str:
    lines = [
        f"overall_accuracy={report.overall_accuracy:.6f}",
        f"test_examples={int(report.confusion.sum())}",
        f"param_count={report.param_count}",
        f"flop_count={report.flop_count}",
        f"flop_convention={FLOP_CONVENTION}",
        f"checkpoint_bytes={report.checkpoint_bytes}",
    ]
    for snr in sorted(report.per_snr_accuracy):
        acc, count = report.per_snr_accuracy[snr]
        lines.append(f"snr.{snr}.accuracy={acc:.6f}")
        lines.append(f"snr.{snr}.count={count}")
    if bench is not None:
        lines += [
            f"bench.cps_mean={bench.classifications_per_second:.3f}",
            f"bench.cps_std={bench.std:.3f}",
            f"bench.repetitions={bench.repetitions}",
            f"bench.batch_mode={bench.batch_mode}",
            f"bench.platform={bench.platform_descriptor}",
        ]
    return "\n".join(lines) + "\n"


def summary_text(report: EvalReport, bench: BenchResult | None = None) -> str:
    parts = []
    rows = [["metric", "value"],
            ["overall top-1 accuracy", f"{report.overall_accuracy:.4f}"],
            ["test examples", str(int(report.confusion.sum()))],
            ["trainable parameters", str(report.param_count)],
            ["forward FLOPs", str(report.flop_count)],
            ["checkpoint bytes", str(report.checkpoint_bytes)]]
    parts.append(_aligned(rows))
    parts.append(f"\nFLOP convention: {FLOP_CONVENTION}.\nNote: {PAPER_FLOPS_NOTE}.\n")
    snr_rows = [["snr_db", "accuracy", "count"]]
    for snr in sorted(report.per_snr_accuracy):
        acc, count = report.per_snr_accuracy[snr]
        snr_rows.append([str(snr), f"{acc:.4f}", str(count)])
    parts.append("top-1 accuracy by SNR\n" + _aligned(snr_rows))
    if bench is not None:
        bench_rows = [["classifications/s mean", f"{bench.classifications_per_second:.1f}"],
                      ["classifications/s std", f"{bench.std:.1f}"],
                      ["repetitions", str(bench.repetitions)],
                      ["batch mode", bench.batch_mode],
                      ["platform", bench.platform_descriptor]]
        parts.append("\nthroughput (single-example eval forward)\n" + _aligned(bench_rows))
    return "\n".join(parts) + "\n"


def render_tables(report: EvalReport, bench: BenchResult | None = None) -> dict[str, str]:
    """All text artifacts keyed by file name."""
    return {
        "summary.txt": summary_text(report, bench),
        "metrics.kv": metrics_kv(report, bench),
        "confusion.csv": confusion_csv(report),
        "per_snr.tsv": per_snr_tsv(report),
    }


def _save_png(fig, path: str) -> None:
    # Render to memory first so a failure never leaves a partial file.
    buf = io.BytesIO()
    fig.savefig(buf, format="png", dpi=120)
    plt.close(fig)
    atomic_write_bytes(path, buf.getvalue())


def render_figures(report: EvalReport, out_dir: str,
                   train_log: TrainLog | None = None) -> list[str]:
    """Accuracy-vs-SNR curve and confusion heatmap (plus loss curves when a
    training log is given), written as PNGs into out_dir."""
    os.makedirs(out_dir, exist_ok=True)
    written = []

    snrs = sorted(report.per_snr_accuracy)
    accs = [report.per_snr_accuracy[s][0] for s in snrs]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(snrs, accs, marker="o")
    ax.set_xlabel("SNR (dB)")
    ax.set_ylabel("top-1 accuracy")
    ax.set_ylim(0.0, 1.02)
    ax.grid(True, alpha=0.3)
    ax.set_title("Top-1 accuracy vs SNR")
    fig.tight_layout()
    path = os.path.join(out_dir, "accuracy_vs_snr.png")
    _save_png(fig, path)
    written.append(path)

    k = len(report.class_names)
    row_sums = report.confusion.sum(axis=1, keepdims=True)
    norm = report.confusion / np.maximum(row_sums, 1)
    fig, ax = plt.subplots(figsize=(1.0 + 0.45 * k, 0.8 + 0.45 * k))
    im = ax.imshow(norm, cmap="Blues", vmin=0.0, vmax=1.0)
    ax.set_xticks(range(k), report.class_names, rotation=90)
    ax.set_yticks(range(k), report.class_names)
    ax.set_xlabel("predicted")
    ax.set_ylabel("true")
    ax.set_title("Confusion matrix (row-normalized)")
    fig.colorbar(im, ax=ax, fraction=0.046)
    fig.tight_layout()
    path = os.path.join(out_dir, "confusion.png")
    _save_png(fig, path)
    written.append(path)

    if train_log is not None and train_log.records:
        epochs = [r.epoch for r in train_log.records]
        fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.5))
        ax1.plot(epochs, [r.total for r in train_log.records], label="total")
        ax1.plot(epochs, [r.recon for r in train_log.records], label="reconstruction")
        ax1.plot(epochs, [r.clf for r in train_log.records], label="classification")
        ax1.set_xlabel("epoch")
        ax1.set_ylabel("mean train loss")
        ax1.legend()
        ax1.grid(True, alpha=0.3)
        ax2.plot(epochs, [r.val_acc for r in train_log.records])
        ax2.set_xlabel("epoch")
        ax2.set_ylabel("validation accuracy")
        ax2.set_ylim(0.0, 1.02)
        ax2.grid(True, alpha=0.3)
        fig.tight_layout()
        path = os.path.join(out_dir, "training.png")
        _save_png(fig, path)
        written.append(path)
    return written
