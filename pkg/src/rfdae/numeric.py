"""Dense float64 arithmetic, seeded randomness and stable activations.

Everything above this module computes in float64; float32 appears only in
serialized datasets and checkpoints. Arrays are plain numpy ndarrays in
row-major order.
"""

from __future__ import annotations

import zlib

import numpy as np

__all__ = [
    "RfdaeError",
    "ShapeError",
    "NumericError",
    "Rng",
    "matmul",
    "sigmoid",
    "tanh_act",
    "softmax",
    "relu",
    "ensure_finite",
]


class RfdaeError(Exception):
    """Base class for all library errors."""


class ShapeError(RfdaeError):
    """Operand shapes are incompatible."""


class NumericError(RfdaeError):
    """A non-finite value appeared where finite values are required."""


def ensure_finite(arr: np.ndarray, name: str) -> np.ndarray:
    """Raise NumericError naming `name` if `arr` contains NaN or Inf."""
    if not np.all(np.isfinite(arr)):
        raise NumericError(f"non-finite values in {name}")
    return arr


class Rng:
    """Seeded PCG64 stream with labeled, independent substreams.

    The generator is numpy's PCG64 keyed by SeedSequence(seed, spawn_key),
    where the spawn key is the chain of CRC32 hashes of the substream labels
    taken so far. Identical seed and identical call sequence give identical
    output; distinct labels give statistically independent streams, so
    reordering one consumer (say dropout) never perturbs another (say
    shuffling). An Rng is single-owner: share seeds, not instances.
    """

    def __init__(self, seed: int, _key: tuple[int, ...] = ()):
        self.seed = int(seed)
        self._key = _key
        self._gen = np.random.Generator(
            np.random.PCG64(np.random.SeedSequence(self.seed, spawn_key=_key))
        )

    def substream(self, label: str) -> "Rng":
        """Derive the independent stream for `label` (init, dropout, ...)."""
        return Rng(self.seed, self._key + (zlib.crc32(label.encode()),))

    # Thin passthroughs to the underlying generator, so call sites stay short.
    def uniform(self, low: float, high: float, size=None) -> np.ndarray:
        return self._gen.uniform(low, high, size)

    def normal(self, size=None) -> np.ndarray:
        return self._gen.standard_normal(size)

    def random(self, size=None) -> np.ndarray:
        return self._gen.random(size)

    def integers(self, low: int, high: int, size=None) -> np.ndarray:
        return self._gen.integers(low, high, size)

    def permutation(self, n) -> np.ndarray:
        return self._gen.permutation(n)

    def choice(self, n: int, size: int, replace: bool = False) -> np.ndarray:
        return self._gen.choice(n, size=size, replace=replace)

    def __repr__(self) -> str:
        return f"Rng(seed={self.seed}, key={self._key})"


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Matrix product with an explicit shape check.

    The reduction order is fixed by the numerics backend for a given build,
    so repeated runs on one machine are bitwise identical.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeError(f"matmul expects 2-d operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul shape mismatch: {a.shape} x {b.shape}")
    out = a @ b
    return ensure_finite(out, "matmul result")


def sigmoid(x: np.ndarray) -> np.ndarray:
    """Elementwise logistic function in the branch-stable form.

    exp is only ever taken of a non-positive argument, so no overflow for
    any finite input; outputs lie in (0, 1).
    """
    x = np.asarray(x, dtype=np.float64)
    e = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def tanh_act(x: np.ndarray) -> np.ndarray:
    """Elementwise hyperbolic tangent; outputs in (-1, 1)."""
    return np.tanh(np.asarray(x, dtype=np.float64))


def softmax(logits: np.ndarray) -> np.ndarray:
    """Max-subtracted softmax over the last axis.

    Outputs are strictly positive and sum to 1 within 1e-12 for any finite
    logits, including magnitudes around 1e4.
    """
    z = np.asarray(logits, dtype=np.float64)
    if z.shape[-1] < 1:
        raise ShapeError("softmax needs at least one logit")
    z = z - np.max(z, axis=-1, keepdims=True)
    e = np.exp(z)
    out = e / np.sum(e, axis=-1, keepdims=True)
    # Keep strict positivity even when exp underflows (spread > ~745); the
    # floor is far below the 1e-12 sum tolerance.
    return np.maximum(out, np.finfo(np.float64).tiny)


def relu(x: np.ndarray) -> np.ndarray:
    """Elementwise max(0, x)."""
    return np.maximum(np.asarray(x, dtype=np.float64), 0.0)
