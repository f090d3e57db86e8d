"""Minibatch training loop: shuffling, corruption, dropout scheduling, Adam,
per-epoch validation and best-checkpoint selection.

Single-worker and deterministic: identical (seed, data, config) reproduce
identical final weights bitwise. The minibatch is computed by a vectorized
kernel whose gradient equals the mean of per-example gradients.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .model import DaeModel, corrupt_batch
from .numeric import NumericError, Rng
from .optim import AdamState, adam_step

TRAIN_LOG_COLUMNS = ("epoch", "total", "recon", "clf", "val_acc", "seconds")


@dataclass
class TrainConfig:
    """Run hyperparameters; defaults are the standard configuration."""

    epochs: int = 150
    batch_size: int = 128
    lr: float = 0.001
    seed: int = 0
    lam: float = 0.1
    mask_rate: float = 0.1
    dropout_rate: float = 0.2
    split: tuple[float, float, float] = (0.5, 0.25, 0.25)
    grad_clip: float | None = None
    input_calibration: bool = True

    def __post_init__(self):
        if abs(sum(self.split) - 1.0) > 1e-9:
            raise ValueError("split fractions must sum to 1")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be positive")
        for name in ("lam", "mask_rate", "dropout_rate"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} out of range: {v}")


@dataclass
class EpochRecord:
    epoch: int
    total: float
    recon: float
    clf: float
    val_acc: float
    seconds: float


@dataclass
class TrainLog:
    records: list[EpochRecord] = field(default_factory=list)
    best_epoch: int = 0

    def to_text(self) -> str:
        lines = ["\t".join(TRAIN_LOG_COLUMNS)]
        for r in self.records:
            lines.append(
                f"{r.epoch}\t{r.total:.10g}\t{r.recon:.10g}\t{r.clf:.10g}"
                f"\t{r.val_acc:.6f}\t{r.seconds:.3f}"
            )
        return "\n".join(lines) + "\n"


def split_indices(labels: np.ndarray, snrs: np.ndarray, fractions, rng: Rng):
    """Stratify by (class, snr): each stratum is shuffled then cut 50/25/25.

    Per-SNR accuracy curves need every split to see every (class, snr) cell,
    so the cut happens inside each cell, remainders going to the test side.
    """
    train_idx, val_idx, test_idx = [], [], []
    cells = sorted(set(zip(labels.tolist(), snrs.tolist())))
    for cell in cells:
        members = np.nonzero((labels == cell[0]) & (snrs == cell[1]))[0]
        members = members[rng.permutation(len(members))]
        n = len(members)
        n_train = int(round(fractions[0] * n))
        n_val = int(round(fractions[1] * n))
        n_train = min(n_train, n)
        n_val = min(n_val, n - n_train)
        train_idx.extend(members[:n_train])
        val_idx.extend(members[n_train:n_train + n_val])
        test_idx.extend(members[n_train + n_val:])
    return (np.array(sorted(train_idx), dtype=np.int64),
            np.array(sorted(val_idx), dtype=np.int64),
            np.array(sorted(test_idx), dtype=np.int64))


def calibrate_input_kernels(model: DaeModel, x_sample: np.ndarray) -> np.ndarray:
    """Rescale layer-1 gate kernels so every feature column drives the gates
    at comparable magnitude.

    Feature columns can differ in scale by an order of magnitude (a
    unit-L2-normalized amplitude column has per-sample RMS 1/sqrt(n) while a
    normalized phase column is O(1)); left alone, the quiet columns learn an
    order of magnitude slower. Column j of each gate kernel is scaled to a
    Uniform(-a, a) law with a = 1/(m * rms_j), computed from the supplied
    sample (use the training split: deterministic, no test leakage). Returns
    the per-column RMS used.
    """
    x_sample = np.asarray(x_sample, dtype=np.float64)
    rms = np.sqrt(np.mean(x_sample * x_sample, axis=(0, 1)))
    rms = np.maximum(rms, 1e-6)
    m_in = model.config.input_features
    params = model.encoder.layers[0].params
    for g in "iofc":
        w = getattr(params, f"w_{g}")
        current = np.sqrt(np.mean(w * w, axis=0))
        target = (1.0 / (m_in * rms)) / np.sqrt(3.0)  # RMS of U(-a, a) is a/sqrt(3)
        w *= target / np.maximum(current, 1e-12)
    return rms


def predict_batched(model: DaeModel, x: np.ndarray, batch_size: int = 256) -> np.ndarray:
    """Eval-mode argmax class predictions for x (N, n, m)."""
    preds = np.empty(x.shape[0], dtype=np.int64)
    for start in range(0, x.shape[0], batch_size):
        stop = min(start + batch_size, x.shape[0])
        _, probs = model.forward_batch(x[start:stop], mode="eval")
        preds[start:stop] = np.argmax(probs, axis=1)
    return preds


def train(model: DaeModel, x_all: np.ndarray, labels: np.ndarray, snrs: np.ndarray,
          cfg: TrainConfig, rng: Rng, splits=None, log_fn=None):
    """Train in place; returns (model restored to best-validation weights, TrainLog).

    x_all (N, n, m) holds prepared (already feature-transformed) clean
    signals. `splits` optionally supplies precomputed (train, val, test)
    index arrays; otherwise a stratified split is drawn from the rng.
    """
    if x_all.ndim != 3 or x_all.shape[0] == 0:
        raise ValueError("empty or mis-shaped dataset")
    k = model.config.num_classes
    if labels.min() < 0 or labels.max() >= k:
        raise ValueError(f"label out of range for K={k}")

    # One source of truth for loss/corruption/dropout knobs during this run.
    model.config.lam = cfg.lam
    model.config.mask_rate = cfg.mask_rate
    model.config.dropout_rate = cfg.dropout_rate

    shuffle_root = rng.substream("shuffling")
    mask_rng = rng.substream("masking")
    drop_rng = rng.substream("dropout")
    if splits is None:
        splits = split_indices(labels, snrs, cfg.split, shuffle_root.substream("split"))
    train_idx, val_idx, _ = splits
    if len(train_idx) == 0:
        raise ValueError("empty training split")
    epoch_rng = shuffle_root.substream("epochs")

    if cfg.input_calibration:
        calibrate_input_kernels(model, x_all[train_idx])
    params = model.param_tensors()
    adam = AdamState(params, lr=cfg.lr)
    log = TrainLog()
    best = (-1.0, 0, None)  # (val_acc, epoch, weights); ties go to the later epoch

    x_val = x_all[val_idx]
    y_val = labels[val_idx]
    for epoch in range(1, cfg.epochs + 1):
        t0 = time.perf_counter()
        order = train_idx[epoch_rng.permutation(len(train_idx))]
        sums = np.zeros(3)
        seen = 0
        for start in range(0, len(order), cfg.batch_size):
            batch_idx = order[start:start + cfg.batch_size]
            x_clean = x_all[batch_idx]
            y = labels[batch_idx]
            x_tilde, _ = corrupt_batch(x_clean, cfg.mask_rate, mask_rng)
            x_hat, probs = model.forward_batch(x_tilde, mode="train", rng=drop_rng)
            lb = model.loss_batch(x_clean, x_hat, y, probs)
            if not np.isfinite(lb.total):
                raise NumericError(
                    f"non-finite loss at epoch {epoch}, batch {start // cfg.batch_size}"
                )
            grads = model.backward_batch(x_clean, y, x_hat)
            if cfg.grad_clip is not None:
                _clip_global(grads, cfg.grad_clip)
            adam_step(params, grads, adam)
            b = len(batch_idx)
            sums += b * np.array([lb.total, lb.recon, lb.clf])
            seen += b

        if len(val_idx):
            preds = predict_batched(model, x_val)
            val_acc = float(np.mean(preds == y_val))
        else:
            val_acc = 0.0
        if val_acc >= best[0]:
            best = (val_acc, epoch, model.clone_params())
        rec = EpochRecord(epoch, *(sums / seen), val_acc, time.perf_counter() - t0)
        log.records.append(rec)
        if log_fn is not None:
            log_fn(rec)

    if best[2] is not None:
        model.set_param_tensors(best[2])
        log.best_epoch = best[1]
    return model, log


def _clip_global(grads: dict[str, np.ndarray], threshold: float) -> None:
    norm = np.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
    if norm > threshold:
        scale = threshold / norm
        for g in grads.values():
            g *= scale
