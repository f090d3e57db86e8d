"""Differentiable building blocks: affine layer, inverted dropout, gradient checker.

Layers hold forward caches, so one instance is single-threaded across a
forward/backward pair. Inputs may be single vectors (in,) or batches
(B, in); gradients for batches are summed over the batch (the trainer
divides by the batch size).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .numeric import NumericError, Rng, ShapeError

ACT_NONE = "none"
ACT_RELU = "relu"


class DenseLayer:
    """Affine layer y = act(W x + b) with weight (out, in) and bias (out,)."""

    def __init__(self, weight: np.ndarray, bias: np.ndarray, activation: str = ACT_NONE):
        weight = np.asarray(weight, dtype=np.float64)
        bias = np.asarray(bias, dtype=np.float64)
        if weight.ndim != 2 or bias.ndim != 1 or weight.shape[0] != bias.shape[0]:
            raise ShapeError(
                f"dense layer needs weight (out, in) and bias (out,), got {weight.shape} and {bias.shape}"
            )
        if activation not in (ACT_NONE, ACT_RELU):
            raise ValueError(f"unknown activation {activation!r}")
        self.weight = weight
        self.bias = bias
        self.activation = activation
        self._cache = None

    @classmethod
    def init(cls, n_out: int, n_in: int, activation: str, rng: Rng) -> "DenseLayer":
        # Uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)), zero bias.
        k = 1.0 / np.sqrt(n_in)
        w = rng.uniform(-k, k, (n_out, n_in))
        return cls(w, np.zeros(n_out), activation)

    @property
    def n_in(self) -> int:
        return self.weight.shape[1]

    @property
    def n_out(self) -> int:
        return self.weight.shape[0]

    def forward(self, x: np.ndarray, cache: bool = True) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1] != self.n_in:
            raise ShapeError(f"dense forward: input {x.shape} does not end in {self.n_in}")
        z = x @ self.weight.T + self.bias
        y = np.maximum(z, 0.0) if self.activation == ACT_RELU else z
        if cache:
            self._cache = (x, z)
        return y

    def backward(self, upstream: np.ndarray):
        """Chain-rule gradients (grad_w, grad_b, grad_x) for the cached forward.

        ReLU uses subgradient 0 at exactly 0. Batched upstream (B, out) yields
        batch-summed grad_w/grad_b and per-row grad_x.
        """
        if self._cache is None:
            raise RuntimeError("dense backward called before forward")
        x, z = self._cache
        upstream = np.asarray(upstream, dtype=np.float64)
        if upstream.shape != z.shape:
            raise ShapeError(f"dense backward: upstream {upstream.shape} != preact {z.shape}")
        post = upstream * (z > 0.0) if self.activation == ACT_RELU else upstream
        if x.ndim == 1:
            grad_w = np.outer(post, x)
            grad_b = post.copy()
        else:
            grad_w = post.T @ x
            grad_b = post.sum(axis=0)
        grad_x = post @ self.weight
        return grad_w, grad_b, grad_x


@dataclass
class DropoutSpec:
    """Inverted dropout: train-time zeroing with survivor scaling 1/(1-rate)."""

    rate: float
    mode: str = "train"  # "train" | "eval"

    def __post_init__(self):
        if not 0.0 <= self.rate < 1.0:
            raise ValueError(f"dropout rate must be in [0, 1), got {self.rate}")
        if self.mode not in ("train", "eval"):
            raise ValueError(f"dropout mode must be 'train' or 'eval', got {self.mode!r}")


def dropout_apply(spec: DropoutSpec, x: np.ndarray, rng: Rng):
    """Return (y, mask) where y = x * mask and mask holds 0 or 1/(1-rate).

    Eval mode (or rate 0) is the identity with an all-ones mask, so backward
    is always a plain multiply by the returned mask.
    """
    x = np.asarray(x, dtype=np.float64)
    if spec.mode == "eval" or spec.rate == 0.0:
        return x.copy(), np.ones_like(x)
    keep = rng.random(x.shape) >= spec.rate
    mask = keep / (1.0 - spec.rate)
    return x * mask, mask


@dataclass
class GradCheckReport:
    """Worst-case central-difference result over a unit's parameter tensors."""

    parameter_name: str
    max_relative_error: float
    passed: bool
    per_parameter: dict = field(default_factory=dict)


def grad_check(unit, tolerance: float, h: float = 1e-5) -> GradCheckReport:
    """Central-difference check of a differentiable unit's analytic gradients.

    `unit` exposes param_tensors() -> {name: ndarray} (live, perturbable in
    place) and loss_and_grads() -> (scalar loss, {name: grad}). For every
    scalar parameter the numeric gradient (f(t+h) - f(t-h)) / 2h is compared
    against the analytic one; the relative error is
    |a - n| / max(|a|, |n|, 1e-8).
    """
    loss0, analytic = unit.loss_and_grads()
    if not np.isfinite(loss0):
        raise NumericError("non-finite loss at the unperturbed point")
    per_param: dict[str, float] = {}
    worst_name, worst_err = "", 0.0
    for name, theta in unit.param_tensors().items():
        a = analytic[name]
        if a.shape != theta.shape:
            raise ShapeError(f"gradient for {name} has shape {a.shape}, expected {theta.shape}")
        max_err = 0.0
        flat = theta.reshape(-1)
        a_flat = a.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            f_plus = unit.loss_and_grads()[0]
            flat[i] = orig - h
            f_minus = unit.loss_and_grads()[0]
            flat[i] = orig
            if not (np.isfinite(f_plus) and np.isfinite(f_minus)):
                raise NumericError(f"non-finite loss while probing parameter {name}[{i}]")
            numeric = (f_plus - f_minus) / (2.0 * h)
            err = abs(a_flat[i] - numeric) / max(abs(a_flat[i]), abs(numeric), 1e-8)
            max_err = max(max_err, err)
        per_param[name] = max_err
        if max_err >= worst_err:
            worst_name, worst_err = name, max_err
    return GradCheckReport(
        parameter_name=worst_name,
        max_relative_error=worst_err,
        passed=worst_err < tolerance,
        per_parameter=per_param,
    )
