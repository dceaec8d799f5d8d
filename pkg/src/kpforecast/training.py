"""Adam training loop, pretrain/finetune workflow and checkpoint files.

Checkpoint layout (all integers little-endian)::

    b"KPFC" | u16 version (=1) | u32 header length | header (UTF-8 JSON)
    | zero padding to a 64-byte boundary | tensor payloads

Each payload is raw little-endian float32 data starting at a 64-byte
aligned offset relative to the start of the payload area.  The header
carries the architecture tag, hyper-parameters, the tensor table and a
SHA-256 digest of the payload area.
"""

from __future__ import annotations

import hashlib
import json
import logging
import struct
import time
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from . import tensor as tc
from .dataset import stack_windows
from .errors import (
    CheckpointCorruptError,
    CheckpointFormatError,
    ContractError,
    NumericError,
    ParameterError,
    TrainingDiverged,
)
from .metrics import rmse_x100
from .models import ArchKind, Model, build_model, forward, predict
from .tensor import Tensor

log = logging.getLogger(__name__)

DEFAULT_LR = {
    ArchKind.LSTM: 1e-3,
    ArchKind.CNNLSTM: 1e-3,
    ArchKind.TRANSFORMER: 5e-4,
    ArchKind.MLP: 2e-3,
}


@dataclass
class TrainConfig:
    lr: float = 1e-3
    epochs: int = 200
    batch_size: int = 32
    weight_decay: float = 1e-4
    decoupled_weight_decay: bool = False
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    checkpoint_every: int = 0
    checkpoint_path: str | None = None

    def __post_init__(self):
        if not self.lr >= 0:
            raise ParameterError("learning rate must be non-negative")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ParameterError("Adam betas must lie in [0, 1)")
        if self.batch_size < 1:
            raise ParameterError("batch size must be at least 1")
        if self.epochs < 0:
            raise ParameterError("epochs must be non-negative")

    @classmethod
    def for_arch(cls, arch, **overrides) -> "TrainConfig":
        return cls(lr=DEFAULT_LR[ArchKind.parse(arch)], **overrides)

    @classmethod
    def from_dict(cls, d, arch=None) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ParameterError(f"unknown config fields: {sorted(unknown)}")
        base = {} if arch is None or "lr" in d else {"lr": DEFAULT_LR[ArchKind.parse(arch)]}
        return cls(**{**base, **d})

    def to_dict(self):
        return asdict(self)


@dataclass
class AdamState:
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    t: int = 0


@dataclass
class TrainHistory:
    train_loss: list = field(default_factory=list)
    eval_rmse_x100: list = field(default_factory=list)
    epoch_seconds: list = field(default_factory=list)
    steps: int = 0
    optimizer: AdamState | None = None

    def __len__(self):
        return len(self.train_loss)


def adam_step(params: dict, state: AdamState, cfg: TrainConfig) -> None:
    """One Adam update.

    By default weight decay is classic L2 folded into the gradient before
    the moment updates.  With ``cfg.decoupled_weight_decay`` the parameters
    shrink by ``lr * weight_decay`` directly instead (AdamW form), so the
    decay does not pass through the adaptive normalization.
    """
    missing = [name for name, p in params.items() if p.grad is None]
    if missing:
        raise ContractError(f"missing gradients for {missing[:3]}{'...' if len(missing) > 3 else ''}")
    state.t += 1
    b1, b2 = cfg.beta1, cfg.beta2
    c1 = 1.0 - b1 ** state.t
    c2 = 1.0 - b2 ** state.t
    for name, p in params.items():
        g = p.grad
        if cfg.weight_decay and not cfg.decoupled_weight_decay:
            g = g + cfg.weight_decay * p.data
        if name not in state.m:
            state.m[name] = np.zeros_like(p.data)
            state.v[name] = np.zeros_like(p.data)
        m = state.m[name]
        v = state.v[name]
        m *= b1
        m += (1 - b1) * g
        v *= b2
        v += (1 - b2) * (g * g)
        if cfg.lr:
            update = (m / c1) / (np.sqrt(v / c2) + cfg.eps)
            if cfg.weight_decay and cfg.decoupled_weight_decay:
                update = update + cfg.weight_decay * p.data
            p.data = (p.data - cfg.lr * update).astype(p.data.dtype, copy=False)


def _batches(n, batch_size, rng, merge_singleton=False):
    order = rng.permutation(n)
    out = [order[i:i + batch_size] for i in range(0, n, batch_size)]
    # batch-norm cannot train on one sample; fold a trailing singleton into its neighbour
    if merge_singleton and len(out) > 1 and len(out[-1]) == 1:
        tail = out.pop()
        out[-1] = np.concatenate([out[-1], tail])
    return out


def _as_arrays(windows):
    if isinstance(windows, tuple) and len(windows) == 2:
        return np.asarray(windows[0], np.float32), np.asarray(windows[1], np.float32)
    return stack_windows(list(windows))


def _has_items(windows):
    if windows is None:
        return False
    if isinstance(windows, tuple) and len(windows) == 2:
        return len(windows[0]) > 0
    return len(windows) > 0


def evaluate_rmse(model: Model, windows) -> float:
    X, Y = _as_arrays(windows)
    return rmse_x100(predict(model, X), Y)


def train(model: Model, train_windows, eval_windows, cfg: TrainConfig,
          state: AdamState | None = None) -> TrainHistory:
    """Minimize MSE over ``train_windows`` for ``cfg.epochs`` epochs.

    ``train_windows``/``eval_windows`` are lists of Windows or
    ``(inputs, targets)`` array pairs.  The model is left in eval mode.
    """
    state = AdamState() if state is None else state
    history = TrainHistory(optimizer=state)
    if cfg.epochs == 0:
        model.eval()
        return history
    X, Y = _as_arrays(train_windows)
    if len(X) == 0:
        raise ParameterError("training set is empty")
    eval_set = _as_arrays(eval_windows) if _has_items(eval_windows) else None
    params = model.params
    step = 0
    for epoch in range(1, cfg.epochs + 1):
        t0 = time.perf_counter()
        rng = np.random.default_rng([cfg.seed, epoch])
        model.train()
        total = 0.0
        for idx in _batches(len(X), cfg.batch_size, rng, merge_singleton=bool(model.buffers)):
            step += 1
            model.zero_grad()
            try:
                loss = tc.mse_loss(forward(model, X[idx]), Y[idx])
                tc.backward(loss)
            except NumericError as exc:
                raise TrainingDiverged(epoch, step, str(exc)) from exc
            lval = loss.item()
            if not np.isfinite(lval):
                raise TrainingDiverged(epoch, step, "loss is not finite")
            adam_step(params, state, cfg)
            total += lval * len(idx)
        history.train_loss.append(total / len(X))
        model.eval()
        history.eval_rmse_x100.append(evaluate_rmse(model, eval_set) if eval_set is not None else float("nan"))
        history.epoch_seconds.append(time.perf_counter() - t0)
        log.info("epoch %d/%d loss %.6f eval rmse_x100 %.4f", epoch, cfg.epochs,
                 history.train_loss[-1], history.eval_rmse_x100[-1])
        if cfg.checkpoint_every and cfg.checkpoint_path and epoch % cfg.checkpoint_every == 0:
            save_checkpoint(model, state, cfg.checkpoint_path)
    history.steps = step
    model.eval()
    return history


def pretrain_finetune(arch, synth_windows, real_train, real_eval,
                      cfg_pre: TrainConfig, cfg_fine: TrainConfig, **hyper):
    """Pretrain on synthetic windows, then continue on real windows with a fresh Adam state."""
    model = build_model(arch, seed=cfg_pre.seed, **hyper)
    pre = train(model, synth_windows, real_eval, cfg_pre)
    fine = train(model, real_train, real_eval, cfg_fine)
    return model, pre, fine


# --------------------------------------------------------------------------
# checkpoints

MAGIC = b"KPFC"
VERSION = 1
ALIGN = 64


def _pad(n):
    return (-n) % ALIGN


def _tensor_table(model: Model, state: AdamState | None):
    items = [(name, "param", p.data) for name, p in model.params.items()]
    for name, st in model.buffers.items():
        items.append((f"{name}.running_mean", "buffer", st.running_mean))
        items.append((f"{name}.running_var", "buffer", st.running_var))
    if state is not None:
        for name in model.params:
            if name in state.m:
                items.append((name, "adam_m", state.m[name]))
                items.append((name, "adam_v", state.v[name]))
    return items


def save_checkpoint(model: Model, state: AdamState | None, path, meta: dict | None = None) -> None:
    table, chunks, offset = [], [], 0
    for name, role, arr in _tensor_table(model, state):
        raw = np.ascontiguousarray(arr, dtype="<f4").tobytes()
        table.append({"name": name, "role": role, "dtype": "f32", "shape": list(arr.shape),
                      "offset": offset, "nbytes": len(raw)})
        chunks.append(raw + b"\0" * _pad(len(raw)))
        offset += len(raw) + _pad(len(raw))
    payload = b"".join(chunks)
    header = {
        "arch": model.kind.value,
        "hyper": model.hyper,
        "seed": model.seed,
        "step": model.step,
        "adam_t": None if state is None else state.t,
        "tensors": table,
        "payload_bytes": len(payload),
        "sha256": hashlib.sha256(payload).hexdigest(),
        "meta": meta or {},
    }
    hbytes = json.dumps(header, sort_keys=True).encode("utf-8")
    prefix = MAGIC + struct.pack("<HI", VERSION, len(hbytes)) + hbytes
    with open(path, "wb") as fh:
        fh.write(prefix + b"\0" * _pad(len(prefix)) + payload)


def read_checkpoint_header(path) -> dict:
    with open(path, "rb") as fh:
        head = fh.read(10)
        if len(head) < 10 or head[:4] != MAGIC:
            raise CheckpointFormatError(f"{path}: not a KPFC checkpoint")
        version, hlen = struct.unpack("<HI", head[4:])
        if version != VERSION:
            raise CheckpointFormatError(f"{path}: unsupported checkpoint version {version}")
        hbytes = fh.read(hlen)
    if len(hbytes) != hlen:
        raise CheckpointCorruptError(f"{path}: truncated header")
    try:
        return json.loads(hbytes.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointCorruptError(f"{path}: unreadable header ({exc})") from None


def load_checkpoint(path):
    """Return ``(model, adam_state)``; the state is ``None`` if none was saved."""
    with open(path, "rb") as fh:
        blob = fh.read()
    header = read_checkpoint_header(path)
    hlen = struct.unpack("<I", blob[6:10])[0]
    start = 10 + hlen
    start += _pad(start)
    payload = blob[start:]
    if len(payload) != header["payload_bytes"]:
        raise CheckpointCorruptError(f"{path}: expected {header['payload_bytes']} payload bytes, "
                                     f"found {len(payload)}")
    if hashlib.sha256(payload).hexdigest() != header["sha256"]:
        raise CheckpointCorruptError(f"{path}: payload checksum mismatch")

    hyper = dict(header["hyper"])
    base = {k: hyper.pop(k) for k in ("t_in", "t_out", "joints", "dims")}
    model = build_model(header["arch"], seed=header["seed"], **base, **hyper)
    model.step = header["step"]
    state = None if header["adam_t"] is None else AdamState(t=header["adam_t"])
    buffers = {}
    for entry in header["tensors"]:
        if entry["dtype"] != "f32":
            raise CheckpointFormatError(f"unsupported dtype {entry['dtype']}")
        raw = payload[entry["offset"]:entry["offset"] + entry["nbytes"]]
        arr = np.frombuffer(raw, dtype="<f4").astype(np.float32).reshape(entry["shape"])
        name, role = entry["name"], entry["role"]
        if role == "param":
            if name not in model.params or model.params[name].shape != arr.shape:
                raise CheckpointFormatError(f"parameter {name} does not fit architecture {header['arch']}")
            model.params[name] = Tensor(arr, requires_grad=True, dtype=np.float32)
        elif role == "buffer":
            buffers[name] = arr
        elif role in ("adam_m", "adam_v") and state is not None:
            (state.m if role == "adam_m" else state.v)[name] = arr
    for name, st in model.buffers.items():
        st.running_mean = buffers[f"{name}.running_mean"]
        st.running_var = buffers[f"{name}.running_var"]
    model.eval()
    return model, state
