"""Dense tensors with reverse-mode automatic differentiation.

Only the operations needed by the four forecaster architectures are
provided.  Values are stored as contiguous numpy arrays (float32 by
default).  Every op records its parents and a backward rule; calling
:func:`backward` on a scalar loss sweeps the recorded graph in reverse
topological order and accumulates gradients into leaf tensors.

Ops keep the dtype of their inputs, so a graph built from float64
tensors is evaluated entirely in float64 (used by :func:`grad_check`).
"""

from __future__ import annotations

import math

import numpy as np

from .errors import (
    ContractError,
    DegenerateBatchError,
    DimensionError,
    NumericError,
    ParameterError,
)

DEFAULT_DTYPE = np.float32
NORM_EPS = 1e-5


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward", "op")

    def __init__(self, data, requires_grad=False, dtype=None):
        arr = np.asarray(data, dtype=dtype)
        if dtype is None and arr.dtype not in (np.float32, np.float64):
            arr = arr.astype(DEFAULT_DTYPE)
        if arr.ndim == 0:
            arr = arr.reshape(())
        self.data = np.ascontiguousarray(arr)
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self._parents = ()
        self._backward = None
        self.op = "leaf"

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self):
        return self.data.size

    def numpy(self):
        return self.data

    def item(self):
        if self.data.size != 1:
            raise ContractError(f"item() needs a one-element tensor, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def zero_grad(self):
        self.grad = None

    def detach(self):
        return Tensor(self.data.copy(), dtype=self.data.dtype)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, dtype={self.dtype}, op={self.op}, requires_grad={self.requires_grad})"

    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return add(self, scale(other, -1.0))

    def __mul__(self, other):
        if isinstance(other, Tensor):
            return mul(self, other)
        return scale(self, other)

    __rmul__ = __mul__

    def __matmul__(self, other):
        return matmul(self, other)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, *axes):
        return transpose(self, axes)


def as_tensor(x, dtype=None):
    if isinstance(x, Tensor):
        return x
    return Tensor(x, dtype=dtype)


def _node(data, parents, backward_fn, op):
    # a single non-finite element makes the sum non-finite
    if not math.isfinite(float(data.sum())):
        raise NumericError(f"non-finite values produced by {op}")
    out = Tensor(data, dtype=data.dtype)
    out.op = op
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward_fn
    return out


# --------------------------------------------------------------------------
# tape and backward sweep


class Tape:
    """Topologically ordered record of the ops feeding a tensor."""

    def __init__(self, nodes):
        self.nodes = list(nodes)

    def __len__(self):
        return len(self.nodes)

    @classmethod
    def record(cls, root: Tensor) -> "Tape":
        order, seen = [], set()
        stack = [(root, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in seen and p.requires_grad:
                    stack.append((p, False))
        return cls(order)


def backward(loss: Tensor, tape: Tape | None = None) -> None:
    """Accumulate d(loss)/d(leaf) into ``leaf.grad`` for every leaf requiring grad."""
    if loss.size != 1:
        raise ContractError(f"backward needs a scalar loss, got shape {loss.shape}")
    if not loss.requires_grad:
        return
    if tape is None:
        tape = Tape.record(loss)
    grads = {id(loss): np.ones_like(loss.data)}
    for node in reversed(tape.nodes):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if node._backward is None:
            node.grad = g.copy() if node.grad is None else node.grad + g
            continue
        for parent, pg in zip(node._parents, node._backward(g)):
            if pg is None or not parent.requires_grad:
                continue
            key = id(parent)
            if key in grads:
                grads[key] = grads[key] + pg
            else:
                grads[key] = pg


# --------------------------------------------------------------------------
# elementwise / structural ops


def _unbroadcast(g, shape):
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    try:
        out = a.data + b.data
    except ValueError as exc:
        raise DimensionError(f"cannot add shapes {a.shape} and {b.shape}") from exc

    def bw(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return _node(out, (a, b), bw, "add")


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    if a.shape != b.shape:
        raise DimensionError(f"mul needs equal shapes, got {a.shape} and {b.shape}")

    def bw(g):
        return g * b.data, g * a.data

    return _node(a.data * b.data, (a, b), bw, "mul")


def scale(x, c: float):
    x = as_tensor(x)
    c = x.data.dtype.type(c)
    return _node(x.data * c, (x,), lambda g: (g * c,), "scale")


def reshape(x, shape):
    x = as_tensor(x)
    try:
        out = x.data.reshape(shape)
    except ValueError as exc:
        raise DimensionError(f"cannot reshape {x.shape} to {shape}") from exc
    return _node(out, (x,), lambda g: (g.reshape(x.shape),), "reshape")


def transpose(x, axes):
    x = as_tensor(x)
    axes = tuple(axes)
    inv = tuple(np.argsort(axes))
    out = np.ascontiguousarray(x.data.transpose(axes))
    return _node(out, (x,), lambda g: (g.transpose(inv),), "transpose")


def take_last(x):
    """``x[:, -1]`` along the second axis."""
    x = as_tensor(x)

    def bw(g):
        full = np.zeros_like(x.data)
        full[:, -1] = g
        return (full,)

    return _node(x.data[:, -1].copy(), (x,), bw, "take_last")


def take_last_keepdim(x):
    """``x[:, -1:]`` along the second axis."""
    x = as_tensor(x)

    def bw(g):
        full = np.zeros_like(x.data)
        full[:, -1:] = g
        return (full,)

    return _node(x.data[:, -1:].copy(), (x,), bw, "take_last")


def sum_all(x):
    x = as_tensor(x)
    return _node(np.asarray(x.data.sum(), dtype=x.dtype), (x,),
                 lambda g: (np.broadcast_to(g, x.shape).copy(),), "sum")


def square(x):
    x = as_tensor(x)
    return _node(x.data * x.data, (x,), lambda g: (2 * g * x.data,), "square")


def matmul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    if a.shape[-1] != b.shape[-2 if b.ndim > 1 else 0]:
        raise DimensionError(f"matmul inner dims differ: {a.shape} @ {b.shape}")
    if a.ndim != 2 or b.ndim != 2:
        raise DimensionError("matmul supports 2-D operands only")

    def bw(g):
        return g @ b.data.T, a.data.T @ g

    return _node(a.data @ b.data, (a, b), bw, "matmul")


# --------------------------------------------------------------------------
# layers


def linear(x, w, b):
    """``x @ w + b`` over the last axis; ``w`` is laid out ``[in, out]``."""
    x, w, b = as_tensor(x), as_tensor(w), as_tensor(b)
    if w.ndim != 2 or x.shape[-1] != w.shape[0]:
        raise DimensionError(f"linear: input {x.shape} incompatible with weight {w.shape}")
    if b.shape != (w.shape[1],):
        raise DimensionError(f"linear: bias {b.shape} does not match weight {w.shape}")
    lead = x.shape[:-1]
    x2 = x.data.reshape(-1, w.shape[0])
    out = (x2 @ w.data + b.data).reshape(lead + (w.shape[1],))

    def bw(g):
        g2 = g.reshape(-1, w.shape[1])
        gx = (g2 @ w.data.T).reshape(x.shape) if x.requires_grad else None
        return gx, x2.T @ g2, g2.sum(axis=0)

    return _node(out, (x, w, b), bw, "linear")


def activation(x, kind: str):
    x = as_tensor(x)
    d = x.data
    if kind == "relu":
        mask = d > 0
        return _node(d * mask, (x,), lambda g: (g * mask,), "relu")
    if kind == "tanh":
        y = np.tanh(d)
        return _node(y, (x,), lambda g: (g * (1 - y * y),), "tanh")
    if kind == "sigmoid":
        y = _sigmoid(d)
        return _node(y, (x,), lambda g: (g * y * (1 - y),), "sigmoid")
    raise ParameterError(f"unknown activation {kind!r}")


def relu(x):
    return activation(x, "relu")


def _sigmoid(z):
    # tanh form never overflows
    half = z.dtype.type(0.5)
    return half * np.tanh(half * z) + half


def dropout(x, p: float, training: bool, rng: np.random.Generator | None = None):
    """Inverted dropout: identity in eval mode, rescaled survivors in train mode."""
    x = as_tensor(x)
    if not 0 <= p < 1:
        raise ParameterError(f"dropout probability must be in [0, 1), got {p}")
    if not training or p == 0:
        return x
    if rng is None:
        raise ParameterError("train-mode dropout needs an rng")
    keep = (rng.random(x.shape, dtype=np.float32) >= p).astype(x.dtype) / x.dtype.type(1 - p)
    return _node(x.data * keep, (x,), lambda g: (g * keep,), "dropout")


class BatchNormState:
    """Running statistics of a batch-norm layer (not learnable)."""

    def __init__(self, channels: int, momentum: float = 0.1, dtype=DEFAULT_DTYPE):
        self.running_mean = np.zeros(channels, dtype=dtype)
        self.running_var = np.ones(channels, dtype=dtype)
        self.momentum = momentum


def batchnorm1d(x, gamma, beta, state: BatchNormState, training: bool):
    """Batch norm over ``[B, C]`` or ``[B, C, L]`` input, per channel."""
    x, gamma, beta = as_tensor(x), as_tensor(gamma), as_tensor(beta)
    if x.ndim not in (2, 3):
        raise DimensionError(f"batchnorm1d expects 2-D or 3-D input, got {x.shape}")
    C = x.shape[1]
    if gamma.shape != (C,) or beta.shape != (C,):
        raise DimensionError("batchnorm1d: gamma/beta must have one entry per channel")
    axes = (0,) if x.ndim == 2 else (0, 2)
    bshape = (1, C) if x.ndim == 2 else (1, C, 1)
    d = x.data
    g_, b_ = gamma.data.reshape(bshape), beta.data.reshape(bshape)

    if not training:
        invstd = 1.0 / np.sqrt(state.running_var.astype(d.dtype) + NORM_EPS)
        xhat = (d - state.running_mean.astype(d.dtype).reshape(bshape)) * invstd.reshape(bshape)

        def bw_eval(g):
            return g * g_ * invstd.reshape(bshape), (g * xhat).sum(axis=axes), g.sum(axis=axes)

        return _node(xhat * g_ + b_, (x, gamma, beta), bw_eval, "batchnorm")

    if x.shape[0] < 2:
        raise DegenerateBatchError("batchnorm1d in train mode needs a batch of at least 2")
    n = d.size // C
    mean = d.mean(axis=axes)
    var = d.var(axis=axes)
    invstd = (1.0 / np.sqrt(var + NORM_EPS)).reshape(bshape)
    xhat = (d - mean.reshape(bshape)) * invstd
    m = state.momentum
    state.running_mean = ((1 - m) * state.running_mean + m * mean).astype(state.running_mean.dtype)
    state.running_var = ((1 - m) * state.running_var + m * var * n / (n - 1)).astype(state.running_var.dtype)

    def bw(g):
        dxhat = g * g_
        sum_d = dxhat.sum(axis=axes, keepdims=True)
        sum_dx = (dxhat * xhat).sum(axis=axes, keepdims=True)
        gx = invstd / n * (n * dxhat - sum_d - xhat * sum_dx)
        return gx, (g * xhat).sum(axis=axes), g.sum(axis=axes)

    return _node(xhat * g_ + b_, (x, gamma, beta), bw, "batchnorm")


def layer_norm(x, gamma, beta):
    x, gamma, beta = as_tensor(x), as_tensor(gamma), as_tensor(beta)
    D = x.shape[-1]
    if gamma.shape != (D,) or beta.shape != (D,):
        raise DimensionError("layer_norm: gamma/beta must match the last axis")
    d = x.data
    mean = d.mean(axis=-1, keepdims=True)
    var = d.var(axis=-1, keepdims=True)
    invstd = 1.0 / np.sqrt(var + NORM_EPS)
    xhat = (d - mean) * invstd

    def bw(g):
        dxhat = g * gamma.data
        gx = invstd / D * (D * dxhat - dxhat.sum(-1, keepdims=True)
                           - xhat * (dxhat * xhat).sum(-1, keepdims=True))
        lead = tuple(range(g.ndim - 1))
        return gx, (g * xhat).sum(axis=lead), g.sum(axis=lead)

    return _node(xhat * gamma.data + beta.data, (x, gamma, beta), bw, "layer_norm")


def conv1d(x, w, b, padding: int = 1):
    """Stride-1 cross-correlation of ``[B, Cin, L]`` with ``[Cout, Cin, K]``."""
    x, w, b = as_tensor(x), as_tensor(w), as_tensor(b)
    if x.ndim != 3 or w.ndim != 3 or x.shape[1] != w.shape[1]:
        raise DimensionError(f"conv1d: input {x.shape} incompatible with kernel {w.shape}")
    if b.shape != (w.shape[0],):
        raise DimensionError("conv1d: bias must have one entry per output channel")
    B, Cin, L = x.shape
    Cout, _, K = w.shape
    Lp = L + 2 * padding
    if K > Lp:
        raise DimensionError(f"conv1d: kernel {K} larger than padded input {Lp}")
    Lout = Lp - K + 1
    xp = np.pad(x.data, ((0, 0), (0, 0), (padding, padding))) if padding else x.data
    # cols[b, t, c, k] = xp[b, c, t + k]
    cols = np.lib.stride_tricks.sliding_window_view(xp, K, axis=2).transpose(0, 2, 1, 3)
    cols = np.ascontiguousarray(cols).reshape(B * Lout, Cin * K)
    wmat = w.data.reshape(Cout, Cin * K)
    out = (cols @ wmat.T + b.data).reshape(B, Lout, Cout).transpose(0, 2, 1)

    def bw(g):
        g2 = g.transpose(0, 2, 1).reshape(B * Lout, Cout)
        gw = (g2.T @ cols).reshape(w.shape)
        gx = None
        if x.requires_grad:
            gcols = (g2 @ wmat).reshape(B, Lout, Cin, K)
            gxp = np.zeros_like(xp)
            for k in range(K):
                gxp[:, :, k:k + Lout] += gcols[:, :, :, k].transpose(0, 2, 1)
            gx = gxp[:, :, padding:padding + L] if padding else gxp
        return gx, gw, g2.sum(axis=0)

    return _node(np.ascontiguousarray(out), (x, w, b), bw, "conv1d")


def lstm_layer(x, w_ih, w_hh, b_ih, b_hh, h0=None, c0=None):
    """One LSTM layer over ``[B, T, I]`` input; gate order (input, forget, cell, output).

    Returns ``(outputs, h_T, c_T)``.  Gradients flow through ``outputs``
    (and ``h_T``, which is its last step); ``c_T`` is returned detached.
    """
    x, w_ih, w_hh, b_ih, b_hh = (as_tensor(t) for t in (x, w_ih, w_hh, b_ih, b_hh))
    if x.ndim != 3:
        raise DimensionError(f"lstm_layer expects [B, T, I] input, got {x.shape}")
    B, T, I = x.shape
    H4 = w_ih.shape[0]
    H = H4 // 4
    if (w_ih.shape != (4 * H, I) or w_hh.shape != (4 * H, H)
            or b_ih.shape != (4 * H,) or b_hh.shape != (4 * H,)):
        raise DimensionError("lstm_layer: gate parameter shapes are inconsistent")
    dt = np.result_type(x.data, w_ih.data)
    h = np.zeros((B, H), dt) if h0 is None else np.asarray(h0, dt)
    c = np.zeros((B, H), dt) if c0 is None else np.asarray(c0, dt)
    if h.shape != (B, H) or c.shape != (B, H):
        raise DimensionError("lstm_layer: initial state must be [B, H]")

    xg = (x.data.reshape(B * T, I) @ w_ih.data.T + (b_ih.data + b_hh.data)).reshape(B, T, 4 * H)
    whT = w_hh.data.T
    hs = np.empty((B, T + 1, H), dt)   # hs[:, t] is the state entering step t
    cs = np.empty((B, T + 1, H), dt)
    acts = np.empty((B, T, 4 * H), dt)
    hs[:, 0], cs[:, 0] = h, c
    for t in range(T):
        z = xg[:, t] + hs[:, t] @ whT
        a = acts[:, t]
        a[:, :2 * H] = _sigmoid(z[:, :2 * H])
        a[:, 2 * H:3 * H] = np.tanh(z[:, 2 * H:3 * H])
        a[:, 3 * H:] = _sigmoid(z[:, 3 * H:])
        i, f, g, o = a[:, :H], a[:, H:2 * H], a[:, 2 * H:3 * H], a[:, 3 * H:]
        cs[:, t + 1] = f * cs[:, t] + i * g
        hs[:, t + 1] = o * np.tanh(cs[:, t + 1])
    outputs = hs[:, 1:].copy()
    cT = cs[:, T].copy()

    def bw(gout):
        dgates = np.empty((B, T, 4 * H), dt)
        dh_next = np.zeros((B, H), dt)
        dc_next = np.zeros((B, H), dt)
        w_hh_d = w_hh.data
        for t in range(T - 1, -1, -1):
            a = acts[:, t]
            i, f, g, o = a[:, :H], a[:, H:2 * H], a[:, 2 * H:3 * H], a[:, 3 * H:]
            tc = np.tanh(cs[:, t + 1])
            dh = gout[:, t] + dh_next
            dc = dh * o * (1 - tc * tc) + dc_next
            dz = dgates[:, t]
            dz[:, :H] = dc * g * i * (1 - i)
            dz[:, H:2 * H] = dc * cs[:, t] * f * (1 - f)
            dz[:, 2 * H:3 * H] = dc * i * (1 - g * g)
            dz[:, 3 * H:] = dh * tc * o * (1 - o)
            dc_next = dc * f
            dh_next = dz @ w_hh_d
        dg2 = dgates.reshape(B * T, 4 * H)
        gx = (dg2 @ w_ih.data).reshape(B, T, I) if x.requires_grad else None
        gw_ih = dg2.T @ x.data.reshape(B * T, I)
        gw_hh = dg2.T @ hs[:, :T].reshape(B * T, H)
        gb = dg2.sum(axis=0)
        return gx, gw_ih, gw_hh, gb, gb

    out = _node(outputs, (x, w_ih, w_hh, b_ih, b_hh), bw, "lstm")
    return out, take_last(out), Tensor(cT, dtype=dt)


def _softmax(z):
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def multihead_self_attention(x, w_in, b_in, w_out, b_out, heads: int, last_query=False,
                             return_weights=False):
    """Encoder self-attention (no mask) over ``[B, T, D]``.

    ``w_in`` is the fused q/k/v projection laid out ``[3D, D]``; ``w_out``
    is ``[D, D]``; both act as ``x @ W.T + b``.  With ``last_query`` only
    the final position attends (output ``[B, 1, D]``), which is exact when
    nothing downstream reads the other positions.
    """
    x, w_in, b_in, w_out, b_out = (as_tensor(t) for t in (x, w_in, b_in, w_out, b_out))
    if x.ndim != 3:
        raise DimensionError(f"attention expects [B, T, D] input, got {x.shape}")
    B, T, D = x.shape
    if heads < 1 or D % heads:
        raise ParameterError(f"model width {D} is not divisible by {heads} heads")
    if w_in.shape != (3 * D, D) or b_in.shape != (3 * D,) or w_out.shape != (D, D) or b_out.shape != (D,):
        raise DimensionError("attention: projection shapes do not match model width")
    dh = D // heads
    dt = np.result_type(x.data, w_in.data)
    sc = dt.type(1.0 / math.sqrt(dh))
    Tq = 1 if last_query else T
    x2 = x.data.reshape(B * T, D)
    wq, wkv = w_in.data[:D], w_in.data[D:]
    xq = x.data[:, -1] if last_query else x2
    q = (xq @ wq.T + b_in.data[:D]).reshape(B, Tq, heads, dh).transpose(0, 2, 1, 3)
    kv = (x2 @ wkv.T + b_in.data[D:]).reshape(B, T, 2, heads, dh).transpose(2, 0, 3, 1, 4)
    k, v = kv[0], kv[1]                                   # [B, h, T, dh]
    attn = _softmax((q @ k.transpose(0, 1, 3, 2)) * sc)  # [B, h, Tq, T]
    ctx = (attn @ v).transpose(0, 2, 1, 3).reshape(B * Tq, D)
    out = (ctx @ w_out.data.T + b_out.data).reshape(B, Tq, D)

    def bw(g):
        g2 = g.reshape(B * Tq, D)
        gw_out = g2.T @ ctx
        gb_out = g2.sum(axis=0)
        gctx = (g2 @ w_out.data).reshape(B, Tq, heads, dh).transpose(0, 2, 1, 3)
        gattn = gctx @ v.transpose(0, 1, 3, 2)
        gv = attn.transpose(0, 1, 3, 2) @ gctx
        gs = attn * (gattn - (gattn * attn).sum(axis=-1, keepdims=True)) * sc
        gq = (gs @ k).transpose(0, 2, 1, 3).reshape(B * Tq, D)
        gk = gs.transpose(0, 1, 3, 2) @ q
        gkv = np.empty((B, T, 2, heads, dh), dt)
        gkv[:, :, 0] = gk.transpose(0, 2, 1, 3)
        gkv[:, :, 1] = gv.transpose(0, 2, 1, 3)
        gkv = gkv.reshape(B * T, 2 * D)
        gw_in = np.concatenate([gq.T @ xq, gkv.T @ x2])
        gb_in = np.concatenate([gq.sum(axis=0), gkv.sum(axis=0)])
        gx = None
        if x.requires_grad:
            gx = (gkv @ wkv).reshape(B, T, D)
            if last_query:
                gx[:, -1] += gq @ wq
            else:
                gx += (gq @ wq).reshape(B, T, D)
        return gx, gw_in, gb_in, gw_out, gb_out

    y = _node(out, (x, w_in, b_in, w_out, b_out), bw, "attention")
    if return_weights:
        return y, attn
    return y


def positional_encoding(T: int, D: int, dtype=DEFAULT_DTYPE) -> Tensor:
    """Sinusoidal table: sin on even columns, cos on odd columns."""
    if D % 2:
        raise ParameterError(f"positional encoding width must be even, got {D}")
    pos = np.arange(T, dtype=np.float64)[:, None]
    freq = 10000.0 ** (-np.arange(0, D, 2, dtype=np.float64) / D)
    pe = np.empty((T, D))
    pe[:, 0::2] = np.sin(pos * freq)
    pe[:, 1::2] = np.cos(pos * freq)
    return Tensor(pe, dtype=dtype)


def mse_loss(pred, target):
    pred, target = as_tensor(pred), as_tensor(target)
    if pred.shape != target.shape:
        raise DimensionError(f"mse_loss: shapes differ {pred.shape} vs {target.shape}")
    diff = pred.data - target.data.astype(pred.dtype, copy=False)
    n = diff.size
    with np.errstate(over="ignore"):     # overflow surfaces as a NumericError below
        loss = np.asarray((diff * diff).sum() / n, dtype=pred.dtype)

    def bw(g):
        gp = g * 2 * diff / n
        return gp, -gp

    return _node(loss, (pred, target), bw, "mse")


# --------------------------------------------------------------------------
# gradient checking


def grad_check(fn, inputs, step: float = 1e-5, tol: float | None = None,
               max_checks: int | None = None, seed: int = 0, kink_tol: float = 1e-2) -> float:
    """Largest relative error between backprop and central differences.

    ``fn(*inputs)`` must return a scalar Tensor.  Inputs are promoted to
    float64 for the duration of the check and restored afterwards.  The
    relative error of one element is ``|a - b| / max(|a|, |b|, 1e-8)``.

    Two kinds of element are skipped: those where the one-sided differences
    disagree (a relu kink sits inside the stencil), and those where both
    gradients are below the resolution of the difference quotient,
    ``1e3 * eps64 * max(|f|, 1) / step``, so the numeric value is rounding
    noise.  ``max_checks`` limits the number of sampled elements per input.
    Raises ``AssertionError`` when ``tol`` is given and exceeded.
    """
    inputs = list(inputs)
    saved = [(t.data, t.requires_grad, t.grad) for t in inputs]
    rng = np.random.default_rng(seed)
    eps = np.finfo(np.float64).eps
    try:
        for t in inputs:
            t.data = t.data.astype(np.float64)
            t.requires_grad = True
            t.grad = None
        loss = fn(*inputs)
        again = fn(*inputs)
        if not np.array_equal(loss.data, again.data):
            raise ContractError("grad_check needs a deterministic function")
        backward(loss)
        f0 = loss.item()
        worst = 0.0
        for t in inputs:
            analytic = (np.zeros_like(t.data) if t.grad is None else t.grad).reshape(-1)
            flat = t.data.reshape(-1)
            idx = np.arange(flat.size)
            if max_checks is not None and flat.size > max_checks:
                idx = rng.choice(flat.size, size=max_checks, replace=False)
            for j in idx:
                orig = flat[j]
                flat[j] = orig + step
                fp = fn(*inputs).item()
                flat[j] = orig - step
                fm = fn(*inputs).item()
                flat[j] = orig
                fwd, bwd = (fp - f0) / step, (f0 - fm) / step
                if abs(fwd - bwd) > kink_tol * max(abs(fwd), abs(bwd), 1e-3):
                    continue
                numeric = (fp - fm) / (2 * step)
                a = float(analytic[j])
                resolution = 1e3 * eps * max(abs(fp), abs(fm), 1.0) / step
                if abs(a) < resolution and abs(numeric) < resolution:
                    continue
                err = abs(a - numeric) / max(abs(a), abs(numeric), 1e-8)
                worst = max(worst, err)
    finally:
        for t, (d, rg, g) in zip(inputs, saved):
            t.data, t.requires_grad, t.grad = d, rg, g
    if tol is not None and worst > tol:
        raise AssertionError(f"gradient check failed: max relative error {worst:.3g} > {tol}")
    return worst
