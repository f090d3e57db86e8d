"""The denoising-autoencoder classifier: corruption, encoder, shared decoder,
classifier head, joint loss, and parameter/FLOP accounting.

Train-mode forward consumes a corrupted input and the loss reconstructs the
clean signal (the decoder reads every hidden vector, the classifier only the
last one); eval-mode forward is a pure function of weights and input.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field

import numpy as np

from .layers import ACT_NONE, ACT_RELU, DenseLayer, DropoutSpec, dropout_apply
from .lstm import LstmStack
from .numeric import NumericError, Rng, ShapeError, ensure_finite, softmax

PROB_FLOOR = 1e-12

# How many times a predicted probability had to be clamped away from zero in
# cross-entropy; reset/read by tests and the trainer.
_clamp_warnings = 0


def clamp_warning_count() -> int:
    return _clamp_warnings


def reset_clamp_warnings() -> None:
    global _clamp_warnings
    _clamp_warnings = 0


@dataclass
class ModelConfig:
    """Architecture plus the loss/corruption knobs; defaults are the standard run."""

    input_features: int
    seq_len: int
    num_classes: int
    hidden: int = 32
    encoder_depth: int = 2
    classifier_widths: tuple[int, int, int] = None  # defaults to (32, 16, K)
    final_relu: bool = True
    lam: float = 0.1
    mask_rate: float = 0.1
    dropout_rate: float = 0.2

    def __post_init__(self):
        if self.classifier_widths is None:
            self.classifier_widths = (32, 16, self.num_classes)
        self.classifier_widths = tuple(self.classifier_widths)
        if self.num_classes < 2:
            raise ValueError("need at least 2 classes")
        if self.classifier_widths[2] != self.num_classes:
            raise ValueError("last classifier width must equal num_classes")
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError("lambda must lie in [0, 1]")
        if not 0.0 <= self.mask_rate < 1.0:
            raise ValueError("mask_rate must lie in [0, 1)")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must lie in [0, 1)")
        if min(self.input_features, self.seq_len, self.hidden, self.encoder_depth) < 1:
            raise ValueError("sizes must be positive")
        if min(self.classifier_widths) < 1:
            raise ValueError("classifier widths must be positive")


def corrupt(x: np.ndarray, mask_rate: float, rng: Rng):
    """Zero exactly round(mask_rate * n * m) entries, chosen uniformly.

    Returns (x_tilde, mask) where mask is 1 at zeroed entries. Fresh entries
    are drawn per call, so each example gets a new mask every epoch.
    """
    x = np.asarray(x, dtype=np.float64)
    if not 0.0 <= mask_rate < 1.0:
        raise ValueError("mask_rate must lie in [0, 1)")
    total = x.size
    k = int(round(mask_rate * total))
    mask = np.zeros(total)
    if k > 0:
        idx = rng.choice(total, size=k, replace=False)
        mask[idx] = 1.0
    mask = mask.reshape(x.shape)
    return x * (1.0 - mask), mask


def corrupt_batch(x: np.ndarray, mask_rate: float, rng: Rng):
    """Batch variant of corrupt: per-example uniform k-subsets via random keys."""
    x = np.asarray(x, dtype=np.float64)
    batch = x.shape[0]
    total = int(np.prod(x.shape[1:]))
    k = int(round(mask_rate * total))
    if k == 0:
        return x.copy(), np.zeros_like(x)
    keys = rng.random((batch, total))
    idx = np.argpartition(keys, k - 1, axis=1)[:, :k]
    mask = np.zeros((batch, total))
    np.put_along_axis(mask, idx, 1.0, axis=1)
    mask = mask.reshape(x.shape)
    return x * (1.0 - mask), mask


@dataclass
class LossBreakdown:
    total: float
    recon: float
    clf: float
    lam: float


def loss(x_clean: np.ndarray, x_hat: np.ndarray, label: int, probs: np.ndarray,
         lam: float) -> LossBreakdown:
    """Joint objective: (1 - lam) * mean-squared error + lam * cross entropy.

    The MSE is the mean over all n*m scalars; cross entropy is -ln p[label]
    with the probability floored at 1e-12 (floor hits are counted).
    """
    global _clamp_warnings
    x_clean = np.asarray(x_clean, dtype=np.float64)
    x_hat = np.asarray(x_hat, dtype=np.float64)
    if x_clean.shape != x_hat.shape:
        raise ShapeError(f"loss shapes differ: {x_clean.shape} vs {x_hat.shape}")
    if not 0 <= label < probs.shape[-1]:
        raise ValueError(f"label {label} out of range for {probs.shape[-1]} classes")
    recon = float(np.mean((x_clean - x_hat) ** 2))
    p = float(probs[label])
    if p < PROB_FLOOR:
        _clamp_warnings += 1
        p = PROB_FLOOR
    clf = -float(np.log(p))
    return LossBreakdown(total=(1.0 - lam) * recon + lam * clf, recon=recon, clf=clf, lam=lam)


class DaeModel:
    """Encoder stack + shared per-timestep decoder + 3-layer classifier head."""

    def __init__(self, config: ModelConfig, encoder: LstmStack, decoder: DenseLayer,
                 clf1: DenseLayer, clf2: DenseLayer, clf3: DenseLayer):
        self.config = config
        self.encoder = encoder
        self.decoder = decoder
        self.clf1 = clf1
        self.clf2 = clf2
        self.clf3 = clf3
        self._cache = None

    @classmethod
    def init(cls, config: ModelConfig, rng: Rng) -> "DaeModel":
        """Fresh model; draws come from the 'init' substream in a fixed order.

        Classifier biases start slightly positive so no ReLU unit (in
        particular no pre-softmax logit) begins dead; an all-negative final
        layer is an absorbing state under the softmax gradient.
        """
        r = rng.substream("init")
        cfg = config
        enc = LstmStack.init(cfg.encoder_depth, cfg.input_features, cfg.hidden, r)
        dec = DenseLayer.init(cfg.input_features, cfg.hidden, ACT_NONE, r)
        w0, w1, k = cfg.classifier_widths
        clf1 = DenseLayer.init(w0, cfg.hidden, ACT_RELU, r)
        clf2 = DenseLayer.init(w1, w0, ACT_RELU, r)
        clf3 = DenseLayer.init(k, w1, ACT_RELU if cfg.final_relu else ACT_NONE, r)
        clf1.bias += 0.1
        clf2.bias += 0.1
        clf3.bias += 0.5
        return cls(cfg, enc, dec, clf1, clf2, clf3)

    # -- parameter registry ------------------------------------------------

    def param_tensors(self) -> dict[str, np.ndarray]:
        """Live tensors in canonical (serialization) order."""
        out: dict[str, np.ndarray] = {}
        for l, layer in enumerate(self.encoder.layers, start=1):
            for name, arr in layer.params.tensors().items():
                out[f"enc{l}.{name}"] = arr
        out["dec.w"] = self.decoder.weight
        out["dec.b"] = self.decoder.bias
        for i, lay in enumerate((self.clf1, self.clf2, self.clf3), start=1):
            out[f"clf{i}.w"] = lay.weight
            out[f"clf{i}.b"] = lay.bias
        return out

    def set_param_tensors(self, tensors: dict[str, np.ndarray]) -> None:
        own = self.param_tensors()
        if set(tensors) != set(own):
            raise ShapeError("parameter names do not match the model")
        for name, arr in own.items():
            src = np.asarray(tensors[name], dtype=np.float64)
            if src.shape != arr.shape:
                raise ShapeError(f"tensor {name} has shape {src.shape}, expected {arr.shape}")
            arr[...] = src

    def clone_params(self) -> dict[str, np.ndarray]:
        return {k: v.copy() for k, v in self.param_tensors().items()}

    # -- forward / backward --------------------------------------------------

    def forward_batch(self, x: np.ndarray, mode: str = "eval", rng: Rng | None = None):
        """x (B, n, m) -> (x_hat (B, n, m), probs (B, K)).

        Train mode applies dropout (between encoder layers and after clf1
        and clf2) and caches for backward; the caller passes the corrupted
        input. Eval mode is pure and cache-free.
        """
        cfg = self.config
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 3 or x.shape[1:] != (cfg.seq_len, cfg.input_features):
            raise ShapeError(
                f"input {x.shape}, expected (B, {cfg.seq_len}, {cfg.input_features})"
            )
        train = mode == "train"
        if train and rng is None:
            raise ValueError("train-mode forward needs an rng for dropout")
        drop = DropoutSpec(cfg.dropout_rate if train else 0.0, "train" if train else "eval")

        h_seq, h_n = self.encoder.forward_batch(x, drop, rng, cache=train)
        batch, n, hid = h_seq.shape
        x_hat = self.decoder.forward(h_seq.reshape(batch * n, hid), cache=train)
        x_hat = x_hat.reshape(batch, n, cfg.input_features)

        a1 = self.clf1.forward(h_n, cache=train)
        a1d, mask1 = dropout_apply(drop, a1, rng)
        a2 = self.clf2.forward(a1d, cache=train)
        a2d, mask2 = dropout_apply(drop, a2, rng)
        logits = self.clf3.forward(a2d, cache=train)
        probs = softmax(logits)
        ensure_finite(x_hat, "reconstruction")
        ensure_finite(probs, "class probabilities")
        if train:
            self._cache = (x.shape[0], mask1, mask2, probs)
        return x_hat, probs

    def forward(self, x: np.ndarray, mode: str = "eval", rng: Rng | None = None):
        """Single example (n, m) -> (x_hat (n, m), probs (K,))."""
        x_hat, probs = self.forward_batch(np.asarray(x)[None], mode, rng)
        return x_hat[0], probs[0]

    def backward_batch(self, x_clean: np.ndarray, labels: np.ndarray,
                       x_hat: np.ndarray) -> dict[str, np.ndarray]:
        """Mean-over-batch gradients of the joint loss for the cached forward.

        The decoder gradient accumulates over all timesteps; the encoder
        receives the decoder's upstream on every h_j plus the classifier's
        on h_n, with the two paths weighted (1 - lam) and lam.
        """
        if self._cache is None:
            raise RuntimeError("model backward called before a train-mode forward")
        batch, mask1, mask2, probs = self._cache
        cfg = self.config
        x_clean = np.asarray(x_clean, dtype=np.float64)
        labels = np.asarray(labels)
        n, m = cfg.seq_len, cfg.input_features
        lam = cfg.lam

        # Classifier path: d(loss)/d(logits) of softmax + cross entropy.
        one_hot = np.zeros_like(probs)
        one_hot[np.arange(batch), labels] = 1.0
        d_logits = lam * (probs - one_hot) / batch
        gw3, gb3, d_a2d = self.clf3.backward(d_logits)
        gw2, gb2, d_a1d = self.clf2.backward(d_a2d * mask2)
        gw1, gb1, d_hn = self.clf1.backward(d_a1d * mask1)

        # Reconstruction path, mean over all n*m scalars per example.
        d_xhat = (1.0 - lam) * 2.0 * (x_hat - x_clean) / (n * m) / batch
        gw_dec, gb_dec, d_hseq = self.decoder.backward(d_xhat.reshape(batch * n, m))
        d_hseq = d_hseq.reshape(batch, n, cfg.hidden)

        enc_grads, _ = self.encoder.backward_batch(d_hseq, d_hn)
        grads: dict[str, np.ndarray] = {}
        for l, layer_grads in enumerate(enc_grads, start=1):
            for name, arr in layer_grads.items():
                grads[f"enc{l}.{name}"] = arr
        grads["dec.w"] = gw_dec
        grads["dec.b"] = gb_dec
        grads["clf1.w"], grads["clf1.b"] = gw1, gb1
        grads["clf2.w"], grads["clf2.b"] = gw2, gb2
        grads["clf3.w"], grads["clf3.b"] = gw3, gb3
        self._cache = None
        return grads

    def loss_batch(self, x_clean: np.ndarray, x_hat: np.ndarray, labels: np.ndarray,
                   probs: np.ndarray) -> LossBreakdown:
        """Mean LossBreakdown over a batch (matches backward_batch weighting)."""
        global _clamp_warnings
        batch = x_clean.shape[0]
        recon = float(np.mean((x_clean - x_hat) ** 2))
        p = probs[np.arange(batch), labels]
        hits = int(np.count_nonzero(p < PROB_FLOOR))
        if hits:
            _clamp_warnings += hits
            p = np.maximum(p, PROB_FLOOR)
        clf = float(np.mean(-np.log(p)))
        lam = self.config.lam
        return LossBreakdown(total=(1.0 - lam) * recon + lam * clf,
                             recon=recon, clf=clf, lam=lam)

    def copy(self) -> "DaeModel":
        clone = DaeModel.init(copy.deepcopy(self.config), Rng(0))
        clone.set_param_tensors(self.param_tensors())
        return clone


def count_params(config: ModelConfig) -> int:
    """Closed-form trainable-parameter count for a configuration."""
    h, m = config.hidden, config.input_features
    total = 0
    n_in = m
    for _ in range(config.encoder_depth):
        total += 4 * (h * (n_in + h) + h)
        n_in = h
    total += h * m + m  # shared decoder
    widths = (h,) + config.classifier_widths
    for a, b in zip(widths, widths[1:]):
        total += a * b + b
    return total


FLOP_CONVENTION = (
    "1 multiply-accumulate = 2 FLOPs, counting affine transforms only "
    "(gate input/recurrent products each step, decoder each step, classifier "
    "once per sequence); elementwise gate products and activations excluded"
)


def count_flops(config: ModelConfig) -> int:
    """FLOPs of one forward pass over seq_len timesteps, per FLOP_CONVENTION."""
    h, m, n = config.hidden, config.input_features, config.seq_len
    macs_per_step = 0
    n_in = m
    for _ in range(config.encoder_depth):
        macs_per_step += 4 * h * (n_in + h)
        n_in = h
    macs_per_step += h * m  # decoder at every step
    clf_macs = 0
    widths = (h,) + config.classifier_widths
    for a, b in zip(widths, widths[1:]):
        clf_macs += a * b
    return 2 * (n * macs_per_step + clf_macs)
