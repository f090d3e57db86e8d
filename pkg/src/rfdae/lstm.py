"""LSTM cell and stacked sequence encoder with backpropagation through time.

The cell follows the usual gated recurrence
    i = sig(W_i x + U_i h' + b_i)      o = sig(W_o x + U_o h' + b_o)
    f = sig(W_f x + U_f h' + b_f)      g = tanh(W_c x + U_c h' + b_c)
    c = f * c' + i * g                 h = o * tanh(c)
with h0 = c0 = 0. Internally the four gates are stacked [i, f, o, g] so a
whole layer runs on two matmuls per timestep; the per-gate tensors remain
the canonical parameters.

Sequences are processed time-major (n, B, features) in batches; the public
single-sequence API wraps a batch of one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .layers import DropoutSpec, dropout_apply
from .numeric import Rng, ShapeError, sigmoid, tanh_act

# Canonical parameter order, also the serialization order.
PARAM_NAMES = (
    "w_i", "u_i", "b_i",
    "w_o", "u_o", "b_o",
    "w_f", "u_f", "b_f",
    "w_c", "u_c", "b_c",
)


@dataclass
class LstmState:
    """Hidden state h and cell state c, both length H."""

    h: np.ndarray
    c: np.ndarray


class LstmCellParams:
    """All trainable tensors of one LSTM layer (input size m_in, hidden H)."""

    def __init__(self, tensors: dict[str, np.ndarray]):
        missing = [k for k in PARAM_NAMES if k not in tensors]
        if missing:
            raise ShapeError(f"missing LSTM tensors: {missing}")
        for k in PARAM_NAMES:
            setattr(self, k, np.asarray(tensors[k], dtype=np.float64))
        h = self.w_i.shape[0]
        m_in = self.w_i.shape[1]
        for g in "iofc":
            w, u, b = getattr(self, f"w_{g}"), getattr(self, f"u_{g}"), getattr(self, f"b_{g}")
            if w.shape != (h, m_in) or u.shape != (h, h) or b.shape != (h,):
                raise ShapeError(
                    f"inconsistent LSTM tensor shapes for gate {g}: "
                    f"{w.shape}, {u.shape}, {b.shape} with H={h}, m_in={m_in}"
                )
        self.hidden = h
        self.n_in = m_in

    @classmethod
    def init(cls, hidden: int, n_in: int, rng: Rng, forget_bias: float = 2.0,
             output_bias: float = 1.0) -> "LstmCellParams":
        # W, U ~ Uniform(-1/sqrt(H), 1/sqrt(H)); biases zero except the
        # forget gate (memory horizon ~1/(1-sigmoid(b_f)) steps; 2 gives a
        # usable horizon for 100+ step records where 1 forgets within a
        # symbol) and the output gate (exposes more of the cell state to
        # the layers above). Disclosed here so runs are reproducible.
        k = 1.0 / np.sqrt(hidden)
        t = {}
        for g in "iofc":
            t[f"w_{g}"] = rng.uniform(-k, k, (hidden, n_in))
            t[f"u_{g}"] = rng.uniform(-k, k, (hidden, hidden))
            t[f"b_{g}"] = np.zeros(hidden)
        t["b_f"] = np.full(hidden, float(forget_bias))
        t["b_o"] = np.full(hidden, float(output_bias))
        return cls(t)

    def tensors(self) -> dict[str, np.ndarray]:
        return {k: getattr(self, k) for k in PARAM_NAMES}

    # Gate-stacked views in compute order [i, f, o, g]; sigmoid applies to
    # the first 3H rows, tanh to the last H.
    def stacked(self):
        w_all = np.concatenate([self.w_i, self.w_f, self.w_o, self.w_c], axis=0)
        u_all = np.concatenate([self.u_i, self.u_f, self.u_o, self.u_c], axis=0)
        b_all = np.concatenate([self.b_i, self.b_f, self.b_o, self.b_c])
        return w_all, u_all, b_all


def zero_state(hidden: int) -> LstmState:
    return LstmState(np.zeros(hidden), np.zeros(hidden))


def cell_step(params: LstmCellParams, x_j: np.ndarray, prev: LstmState) -> LstmState:
    """One timestep of the recurrence for a single input vector."""
    x_j = np.asarray(x_j, dtype=np.float64)
    if x_j.shape != (params.n_in,):
        raise ShapeError(f"cell_step input {x_j.shape}, expected ({params.n_in},)")
    if prev.h.shape != (params.hidden,) or prev.c.shape != (params.hidden,):
        raise ShapeError("cell_step state dimensions do not match hidden size")
    i = sigmoid(params.w_i @ x_j + params.u_i @ prev.h + params.b_i)
    o = sigmoid(params.w_o @ x_j + params.u_o @ prev.h + params.b_o)
    f = sigmoid(params.w_f @ x_j + params.u_f @ prev.h + params.b_f)
    g = tanh_act(params.w_c @ x_j + params.u_c @ prev.h + params.b_c)
    c = f * prev.c + i * g
    h = o * tanh_act(c)
    return LstmState(h, c)


class LstmLayer:
    """One recurrent layer operating on a full time-major batch.

    Holds the forward caches required by backward_seq, so a layer instance
    is single-threaded across a forward/backward pair. Cache-free forward
    (cache=False) is pure and thread-safe.
    """

    def __init__(self, params: LstmCellParams):
        self.params = params
        self._cache = None

    def forward_seq(self, x_t: np.ndarray, h0: np.ndarray, c0: np.ndarray,
                    cache: bool = True) -> np.ndarray:
        """Run the recurrence over x_t (n, B, in); returns hidden (n, B, H)."""
        p = self.params
        n, batch, n_in = x_t.shape
        if n_in != p.n_in:
            raise ShapeError(f"layer input width {n_in}, expected {p.n_in}")
        hid = p.hidden
        w_all, u_all, b_all = p.stacked()
        xproj = (x_t.reshape(n * batch, n_in) @ w_all.T).reshape(n, batch, 4 * hid)
        xproj += b_all

        gates = np.empty((n, batch, 4 * hid))
        c_seq = np.empty((n, batch, hid))
        tanh_c = np.empty((n, batch, hid))
        h_seq = np.empty((n, batch, hid))
        h, c = h0, c0
        for j in range(n):
            z = xproj[j] + h @ u_all.T
            zs = sigmoid(z[:, : 3 * hid])
            g = np.tanh(z[:, 3 * hid :])
            i, f, o = zs[:, :hid], zs[:, hid : 2 * hid], zs[:, 2 * hid :]
            c = f * c + i * g
            tc = np.tanh(c)
            h = o * tc
            gates[j, :, : 3 * hid] = zs
            gates[j, :, 3 * hid :] = g
            c_seq[j] = c
            tanh_c[j] = tc
            h_seq[j] = h
        if cache:
            self._cache = (x_t, h0, c0, gates, c_seq, tanh_c, h_seq, w_all, u_all)
        return h_seq

    def backward_seq(self, d_h_seq: np.ndarray):
        """BPTT for the cached forward; returns (grads dict, d_input)."""
        if self._cache is None:
            raise RuntimeError("LSTM backward called before forward (no cache)")
        x_t, h0, c0, gates, c_seq, tanh_c, h_seq, w_all, u_all = self._cache
        p = self.params
        n, batch, _ = x_t.shape
        hid = p.hidden
        if d_h_seq.shape != (n, batch, hid):
            raise ShapeError(f"upstream {d_h_seq.shape}, expected {(n, batch, hid)}")

        dz_all = np.empty((n, batch, 4 * hid))
        du_all = np.zeros_like(u_all)
        dh_carry = np.zeros((batch, hid))
        dc = np.zeros((batch, hid))
        for j in range(n - 1, -1, -1):
            i = gates[j, :, :hid]
            f = gates[j, :, hid : 2 * hid]
            o = gates[j, :, 2 * hid : 3 * hid]
            g = gates[j, :, 3 * hid :]
            tc = tanh_c[j]
            c_prev = c_seq[j - 1] if j > 0 else c0
            h_prev = h_seq[j - 1] if j > 0 else h0

            dh = d_h_seq[j] + dh_carry
            dc = dc + dh * o * (1.0 - tc * tc)
            dz = dz_all[j]
            dz[:, :hid] = (dc * g) * i * (1.0 - i)
            dz[:, hid : 2 * hid] = (dc * c_prev) * f * (1.0 - f)
            dz[:, 2 * hid : 3 * hid] = (dh * tc) * o * (1.0 - o)
            dz[:, 3 * hid :] = (dc * i) * (1.0 - g * g)
            du_all += dz.T @ h_prev
            dh_carry = dz @ u_all
            dc = dc * f

        flat = dz_all.reshape(n * batch, 4 * hid)
        dw_all = flat.T @ x_t.reshape(n * batch, -1)
        db_all = flat.sum(axis=0)
        dx = (flat @ w_all).reshape(n, batch, p.n_in)

        grads = {}
        for idx, gate in enumerate("ifoc"):  # stacked order [i, f, o, g(c)]
            sl = slice(idx * hid, (idx + 1) * hid)
            grads[f"w_{gate}"] = dw_all[sl]
            grads[f"u_{gate}"] = du_all[sl]
            grads[f"b_{gate}"] = db_all[sl]
        return grads, dx

    @property
    def final_state_batch(self):
        if self._cache is None:
            raise RuntimeError("no cached forward")
        _, _, _, _, c_seq, _, h_seq, _, _ = self._cache
        return h_seq[-1], c_seq[-1]


class LstmStack:
    """Ordered LSTM layers; layer 1 reads the input features, the rest read H."""

    def __init__(self, layers: list[LstmLayer]):
        if not layers:
            raise ShapeError("stack needs at least one layer")
        for below, above in zip(layers, layers[1:]):
            if above.params.n_in != below.params.hidden:
                raise ShapeError("inter-layer sizes do not chain")
        self.layers = layers
        self._masks = None

    @classmethod
    def init(cls, depth: int, n_in: int, hidden: int, rng: Rng) -> "LstmStack":
        layers = []
        for l in range(depth):
            layers.append(LstmLayer(LstmCellParams.init(hidden, n_in if l == 0 else hidden, rng)))
        return cls(layers)

    @property
    def depth(self) -> int:
        return len(self.layers)

    @property
    def hidden(self) -> int:
        return self.layers[0].params.hidden

    def forward_batch(self, x: np.ndarray, dropout: DropoutSpec, rng: Rng | None,
                      cache: bool = True, initial=None):
        """x (B, n, in) -> (h_seq (B, n, H), h_n (B, H)).

        Dropout (train mode) masks each layer's output sequence before it
        feeds the next layer. `initial` optionally gives per-layer (h0, c0)
        batches; default zeros.
        """
        if x.ndim != 3:
            raise ShapeError(f"expected (B, n, features), got {x.shape}")
        batch, n, _ = x.shape
        if n < 1:
            raise ShapeError("empty sequence")
        cur = np.ascontiguousarray(np.asarray(x, dtype=np.float64).transpose(1, 0, 2))
        masks = []
        for l, layer in enumerate(self.layers):
            hid = layer.params.hidden
            if initial is not None:
                h0, c0 = initial[l]
            else:
                h0, c0 = np.zeros((batch, hid)), np.zeros((batch, hid))
            cur = layer.forward_seq(cur, h0, c0, cache=cache)
            if l < len(self.layers) - 1:
                if dropout.mode == "train" and dropout.rate > 0.0:
                    cur, mask = dropout_apply(dropout, cur, rng)
                    masks.append(mask)
                else:
                    masks.append(None)
        if cache:
            self._masks = masks
        h_seq = cur.transpose(1, 0, 2)
        return h_seq, h_seq[:, -1, :].copy()

    def backward_batch(self, up_h_seq: np.ndarray, up_h_n: np.ndarray):
        """Upstream (B, n, H) over the whole top sequence plus (B, H) on h_n.

        Returns (per-layer grads list, d_input (B, n, in)).
        """
        if self._masks is None:
            raise RuntimeError("stack backward called before forward")
        d = np.ascontiguousarray(up_h_seq.transpose(1, 0, 2))
        d = d.copy()
        d[-1] += up_h_n
        grads: list[dict] = [None] * len(self.layers)
        for l in range(len(self.layers) - 1, -1, -1):
            grads[l], d = self.layers[l].backward_seq(d)
            if l > 0 and self._masks[l - 1] is not None:
                d = d * self._masks[l - 1]
        return grads, d.transpose(1, 0, 2)

    # Single-sequence API.

    def sequence_forward(self, x: np.ndarray, dropout: DropoutSpec, rng: Rng | None = None,
                         initial: list[LstmState] | None = None):
        """x (n, in) -> (h_seq (n, H), h_n (H,)) with zero (or given) start state."""
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[0] < 1:
            raise ShapeError(f"expected a non-empty (n, features) sequence, got {x.shape}")
        init_b = None
        if initial is not None:
            init_b = [(s.h[None, :], s.c[None, :]) for s in initial]
        h_seq, h_n = self.forward_batch(x[None], dropout, rng, cache=True, initial=init_b)
        return h_seq[0], h_n[0]

    def sequence_backward(self, up_h_seq: np.ndarray, up_h_n: np.ndarray):
        grads, dx = self.backward_batch(up_h_seq[None], up_h_n[None])
        return grads, dx[0]

    @property
    def final_states(self) -> list[LstmState]:
        out = []
        for layer in self.layers:
            h, c = layer.final_state_batch
            out.append(LstmState(h[0].copy(), c[0].copy()) if h.shape[0] == 1
                       else LstmState(h.copy(), c.copy()))
        return out
