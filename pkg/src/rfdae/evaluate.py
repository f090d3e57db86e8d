"""Per-SNR accuracy, confusion matrices, and model accounting."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .checkpoint import checkpoint_to_bytes
from .model import DaeModel, count_flops, count_params
from .train import predict_batched

log = logging.getLogger("rfdae")


@dataclass
class EvalReport:
    per_snr_accuracy: dict[int, tuple[float, int]]
    overall_accuracy: float
    confusion: np.ndarray  # (K, K) int64 counts, rows = true class
    class_names: list[str] = field(default_factory=list)
    param_count: int = 0
    flop_count: int = 0
    checkpoint_bytes: int = 0


def evaluate(model: DaeModel, x: np.ndarray, labels: np.ndarray, snrs: np.ndarray,
             class_names: list[str] | None = None) -> EvalReport:
    """Eval-mode top-1 accuracy bucketed by SNR plus the confusion matrix.

    Inputs are the original (uncorrupted) signals. Integer counting
    throughout; the only division is the final accuracy ratio.
    """
    if x.shape[0] == 0:
        raise ValueError("empty evaluation split")
    k = model.config.num_classes
    preds = predict_batched(model, x)
    confusion = np.zeros((k, k), dtype=np.int64)
    np.add.at(confusion, (labels, preds), 1)
    per_snr: dict[int, tuple[float, int]] = {}
    for snr in sorted(set(int(s) for s in snrs)):
        sel = snrs == snr
        count = int(np.count_nonzero(sel))
        if count == 0:
            log.warning("empty SNR bucket %d dB omitted", snr)
            continue
        hits = int(np.count_nonzero(preds[sel] == labels[sel]))
        per_snr[snr] = (hits / count, count)
    overall = int(np.trace(confusion)) / int(confusion.sum())
    names = class_names if class_names is not None else [f"class{i}" for i in range(k)]
    return EvalReport(per_snr_accuracy=per_snr, overall_accuracy=overall,
                      confusion=confusion, class_names=list(names))


def report(model: DaeModel, x: np.ndarray, labels: np.ndarray, snrs: np.ndarray,
           class_names: list[str] | None = None) -> EvalReport:
    """evaluate() plus parameter/FLOP/checkpoint-size accounting."""
    rep = evaluate(model, x, labels, snrs, class_names)
    rep.param_count = count_params(model.config)
    rep.flop_count = count_flops(model.config)
    rep.checkpoint_bytes = len(checkpoint_to_bytes(model))
    return rep
