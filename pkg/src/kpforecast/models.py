"""The four forecaster architectures and their shared one-shot head.

Every model maps a normalized ``[B, T_in, 17, 2]`` observation to a
``[B, T_out, 17, 2]`` forecast in a single head application.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from . import tensor as tc
from .errors import DimensionError, NumericError, ParameterError
from .tensor import BatchNormState, Tensor

T_IN = 60
T_OUT = 30
N_JOINTS = 17
N_DIMS = 2
FRAME_DIM = N_JOINTS * N_DIMS


class ArchKind(str, enum.Enum):
    MLP = "mlp"
    LSTM = "lstm"
    CNNLSTM = "cnnlstm"
    TRANSFORMER = "transformer"

    @classmethod
    def parse(cls, value) -> "ArchKind":
        if isinstance(value, cls):
            return value
        key = str(value).lower().replace("-", "").replace("_", "")
        for kind in cls:
            if kind.value == key or kind.name.lower() == key:
                return kind
        raise ParameterError(f"unknown architecture {value!r}")


DEFAULT_HYPER = {
    ArchKind.MLP: {"hidden": [1024, 512, 256, 128], "dropout": 0.3},
    ArchKind.LSTM: {"hidden": 128, "layers": 2, "dropout": 0.2},
    ArchKind.CNNLSTM: {"channels": [64, 128, 256], "kernel": 3, "padding": 1,
                       "conv_dropout": 0.2, "hidden": 128, "layers": 2, "dropout": 0.2},
    ArchKind.TRANSFORMER: {"d_model": 256, "heads": 8, "layers": 4, "ff": 1024, "dropout": 0.1},
}


@dataclass
class Model:
    kind: ArchKind
    hyper: dict
    params: dict = field(default_factory=dict)
    buffers: dict = field(default_factory=dict)
    seed: int = 0
    training: bool = False
    step: int = 0

    def train(self):
        self.training = True
        return self

    def eval(self):
        self.training = False
        return self

    def parameters(self):
        return list(self.params.values())

    def zero_grad(self):
        for p in self.params.values():
            p.grad = None

    def __call__(self, x):
        return forward(self, x)

    @property
    def input_shape(self):
        h = self.hyper
        return (h["t_in"], h["joints"], h["dims"])

    @property
    def output_shape(self):
        h = self.hyper
        return (h["t_out"], h["joints"], h["dims"])

    def astype(self, dtype):
        """Cast parameters and running stats in place (used for f64 gradient checks)."""
        for p in self.params.values():
            p.data = p.data.astype(dtype)
            p.grad = None
        for st in self.buffers.values():
            st.running_mean = st.running_mean.astype(dtype)
            st.running_var = st.running_var.astype(dtype)
        return self


def _uniform(rng, shape, fan_in, dtype=np.float32):
    bound = 1.0 / math.sqrt(fan_in)
    return Tensor(rng.uniform(-bound, bound, size=shape), requires_grad=True, dtype=dtype)


def _zeros(n):
    return Tensor(np.zeros(n, np.float32), requires_grad=True)


def _ones(n):
    return Tensor(np.ones(n, np.float32), requires_grad=True)


def _add_linear(m, rng, name, n_in, n_out):
    m.params[f"{name}.w"] = _uniform(rng, (n_in, n_out), n_in)
    m.params[f"{name}.b"] = _zeros(n_out)


def _add_lstm(m, rng, prefix, n_in, hidden, layers):
    for layer in range(layers):
        i = n_in if layer == 0 else hidden
        p = f"{prefix}.l{layer}"
        m.params[f"{p}.w_ih"] = _uniform(rng, (4 * hidden, i), i)
        m.params[f"{p}.w_hh"] = _uniform(rng, (4 * hidden, hidden), hidden)
        m.params[f"{p}.b_ih"] = _zeros(4 * hidden)
        m.params[f"{p}.b_hh"] = _zeros(4 * hidden)


def _add_bn(m, name, channels):
    m.params[f"{name}.gamma"] = _ones(channels)
    m.params[f"{name}.beta"] = _zeros(channels)
    m.buffers[name] = BatchNormState(channels)


def build_model(kind, seed: int = 0, **overrides) -> Model:
    """Construct an architecture with U(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights and zero biases.

    ``overrides`` replace entries of the default hyper-parameters, e.g.
    ``hidden=8`` or ``t_in=6`` for small test models.
    """
    kind = ArchKind.parse(kind)
    hyper = {"t_in": T_IN, "t_out": T_OUT, "joints": N_JOINTS, "dims": N_DIMS}
    hyper.update({k: (list(v) if isinstance(v, list) else v) for k, v in DEFAULT_HYPER[kind].items()})
    unknown = set(overrides) - set(hyper)
    if unknown:
        raise ParameterError(f"unknown hyper-parameters for {kind.value}: {sorted(unknown)}")
    hyper.update(overrides)
    m = Model(kind=kind, hyper=hyper, seed=seed)
    rng = np.random.default_rng(seed)
    fdim = hyper["joints"] * hyper["dims"]
    out_dim = hyper["t_out"] * fdim

    if kind is ArchKind.MLP:
        n_in = hyper["t_in"] * fdim
        for i, width in enumerate(hyper["hidden"]):
            _add_linear(m, rng, f"fc{i}", n_in, width)
            _add_bn(m, f"bn{i}", width)
            n_in = width
        _add_linear(m, rng, "head", n_in, out_dim)
    elif kind is ArchKind.LSTM:
        _add_lstm(m, rng, "lstm", fdim, hyper["hidden"], hyper["layers"])
        _add_linear(m, rng, "head", hyper["hidden"], out_dim)
    elif kind is ArchKind.CNNLSTM:
        c_in, k = fdim, hyper["kernel"]
        for i, c_out in enumerate(hyper["channels"]):
            m.params[f"conv{i}.w"] = _uniform(rng, (c_out, c_in, k), c_in * k)
            m.params[f"conv{i}.b"] = _zeros(c_out)
            _add_bn(m, f"cbn{i}", c_out)
            c_in = c_out
        _add_lstm(m, rng, "lstm", c_in, hyper["hidden"], hyper["layers"])
        _add_linear(m, rng, "head", hyper["hidden"], out_dim)
    else:
        d, ff = hyper["d_model"], hyper["ff"]
        if d % hyper["heads"]:
            raise ParameterError("d_model must be divisible by heads")
        _add_linear(m, rng, "proj", fdim, d)
        for i in range(hyper["layers"]):
            p = f"enc{i}"
            m.params[f"{p}.attn.w_in"] = _uniform(rng, (3 * d, d), d)
            m.params[f"{p}.attn.b_in"] = _zeros(3 * d)
            m.params[f"{p}.attn.w_out"] = _uniform(rng, (d, d), d)
            m.params[f"{p}.attn.b_out"] = _zeros(d)
            m.params[f"{p}.norm1.gamma"] = _ones(d)
            m.params[f"{p}.norm1.beta"] = _zeros(d)
            _add_linear(m, rng, f"{p}.ff1", d, ff)
            _add_linear(m, rng, f"{p}.ff2", ff, d)
            m.params[f"{p}.norm2.gamma"] = _ones(d)
            m.params[f"{p}.norm2.beta"] = _zeros(d)
        _add_linear(m, rng, "head", d, out_dim)
    return m


def count_params(model) -> int:
    """Number of learnable values (running statistics excluded)."""
    return int(sum(p.size for p in model.params.values()))


def analytic_param_count(kind, **overrides) -> int:
    """Closed-form parameter count, independent of the stored tensors."""
    kind = ArchKind.parse(kind)
    h = {"t_in": T_IN, "t_out": T_OUT, "joints": N_JOINTS, "dims": N_DIMS, **DEFAULT_HYPER[kind], **overrides}
    fdim = h["joints"] * h["dims"]
    out_dim = h["t_out"] * fdim

    def lin(i, o):
        return i * o + o

    def lstm(i, hid):
        return 4 * hid * (i + hid) + 8 * hid

    if kind is ArchKind.MLP:
        total, n_in = 0, h["t_in"] * fdim
        for w in h["hidden"]:
            total += lin(n_in, w) + 2 * w
            n_in = w
        return total + lin(n_in, out_dim)
    if kind is ArchKind.LSTM:
        total = sum(lstm(fdim if l == 0 else h["hidden"], h["hidden"]) for l in range(h["layers"]))
        return total + lin(h["hidden"], out_dim)
    if kind is ArchKind.CNNLSTM:
        total, c_in = 0, fdim
        for c in h["channels"]:
            total += c_in * c * h["kernel"] + c + 2 * c
            c_in = c
        total += sum(lstm(c_in if l == 0 else h["hidden"], h["hidden"]) for l in range(h["layers"]))
        return total + lin(h["hidden"], out_dim)
    d = h["d_model"]
    layer = 4 * d * d + 4 * d + lin(d, h["ff"]) + lin(h["ff"], d) + 4 * d
    return lin(fdim, d) + h["layers"] * layer + lin(d, out_dim)


# --------------------------------------------------------------------------
# forward passes


def _rng(model, layer_id):
    return np.random.default_rng([model.seed, layer_id, model.step])


def _lstm_stack(model, x, prefix, layer_base):
    h = model.hyper
    out = x
    last = None
    for layer in range(h["layers"]):
        if layer > 0:
            out = tc.dropout(out, h["dropout"], model.training, _rng(model, layer_base + layer))
        p = f"{prefix}.l{layer}"
        out, last, _ = tc.lstm_layer(out, model.params[f"{p}.w_ih"], model.params[f"{p}.w_hh"],
                                     model.params[f"{p}.b_ih"], model.params[f"{p}.b_hh"])
    return last


def _forward_mlp(model, x):
    P, h = model.params, model.hyper
    B = x.shape[0]
    z = x.reshape(B, -1)
    for i in range(len(h["hidden"])):
        z = tc.relu(tc.linear(z, P[f"fc{i}.w"], P[f"fc{i}.b"]))
        z = tc.dropout(z, h["dropout"], model.training, _rng(model, i))
        z = tc.batchnorm1d(z, P[f"bn{i}.gamma"], P[f"bn{i}.beta"], model.buffers[f"bn{i}"], model.training)
    return tc.linear(z, P["head.w"], P["head.b"])


def _forward_lstm(model, x):
    B, T = x.shape[:2]
    last = _lstm_stack(model, x.reshape(B, T, -1), "lstm", 0)
    return tc.linear(last, model.params["head.w"], model.params["head.b"])


def _forward_cnnlstm(model, x):
    P, h = model.params, model.hyper
    B, T = x.shape[:2]
    z = x.reshape(B, T, -1).transpose(0, 2, 1)
    for i in range(len(h["channels"])):
        z = tc.relu(tc.conv1d(z, P[f"conv{i}.w"], P[f"conv{i}.b"], padding=h["padding"]))
        z = tc.batchnorm1d(z, P[f"cbn{i}.gamma"], P[f"cbn{i}.beta"], model.buffers[f"cbn{i}"], model.training)
        z = tc.dropout(z, h["conv_dropout"], model.training, _rng(model, i))
    last = _lstm_stack(model, z.transpose(0, 2, 1), "lstm", 100)
    return tc.linear(last, P["head.w"], P["head.b"])


def _forward_transformer(model, x):
    P, h = model.params, model.hyper
    B, T = x.shape[:2]
    z = tc.linear(x.reshape(B, T, -1), P["proj.w"], P["proj.b"])
    z = z + tc.positional_encoding(T, h["d_model"], dtype=z.dtype)
    for i in range(h["layers"]):
        p = f"enc{i}"
        # only the last token feeds the head, so the top layer computes just that row
        last = i == h["layers"] - 1
        a = tc.multihead_self_attention(z, P[f"{p}.attn.w_in"], P[f"{p}.attn.b_in"],
                                        P[f"{p}.attn.w_out"], P[f"{p}.attn.b_out"], h["heads"],
                                        last_query=last)
        a = tc.dropout(a, h["dropout"], model.training, _rng(model, 2 * i))
        if last:
            z = tc.take_last_keepdim(z)
        z = tc.layer_norm(z + a, P[f"{p}.norm1.gamma"], P[f"{p}.norm1.beta"])
        f = tc.relu(tc.linear(z, P[f"{p}.ff1.w"], P[f"{p}.ff1.b"]))
        f = tc.linear(f, P[f"{p}.ff2.w"], P[f"{p}.ff2.b"])
        f = tc.dropout(f, h["dropout"], model.training, _rng(model, 2 * i + 1))
        z = tc.layer_norm(z + f, P[f"{p}.norm2.gamma"], P[f"{p}.norm2.beta"])
    return tc.linear(z.reshape(B, -1), P["head.w"], P["head.b"])


_FORWARD = {
    ArchKind.MLP: _forward_mlp,
    ArchKind.LSTM: _forward_lstm,
    ArchKind.CNNLSTM: _forward_cnnlstm,
    ArchKind.TRANSFORMER: _forward_transformer,
}


def forward(model: Model, x) -> Tensor:
    """Forecast ``[B, t_out, joints, dims]`` from ``[B, t_in, joints, dims]``.

    In train mode each call consumes one dropout step; masks are a pure
    function of ``(model.seed, layer, model.step)``.
    """
    if not isinstance(x, Tensor):
        x = Tensor(np.asarray(x), dtype=next(iter(model.params.values())).dtype)
    if x.ndim != 4 or x.shape[1:] != model.input_shape:
        raise DimensionError(f"expected input [B, {', '.join(map(str, model.input_shape))}], got {list(x.shape)}")
    try:
        y = _FORWARD[model.kind](model, x)
    finally:
        if model.training:
            model.step += 1
    if not np.all(np.isfinite(y.data)):
        raise NumericError("model produced non-finite output")
    return y.reshape((x.shape[0],) + model.output_shape)


def predict(model: Model, x, batch_size: int = 256) -> np.ndarray:
    """Eval-mode forecast as a plain array, computed in chunks."""
    was = model.training
    model.eval()
    try:
        x = np.asarray(x)
        outs = [forward(model, x[i:i + batch_size]).data for i in range(0, len(x), batch_size)]
    finally:
        model.training = was
    if not outs:
        return np.zeros((0,) + model.output_shape, np.float32)
    return np.concatenate(outs)
