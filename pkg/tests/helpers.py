"""Shared fixtures-by-function for the test modules (not collected by pytest)."""

import numpy as np

from kpforecast import tensor as tc
from kpforecast.dataset import MotionClip
from kpforecast.models import ArchKind, build_model, forward

# reduced dimensions that keep every code path of each architecture
SMALL = {
    ArchKind.MLP: dict(t_in=5, t_out=2, joints=3, hidden=[8, 6]),
    ArchKind.LSTM: dict(t_in=5, t_out=2, joints=3, hidden=6),
    ArchKind.CNNLSTM: dict(t_in=5, t_out=2, joints=3, channels=[4, 5], hidden=6),
    ArchKind.TRANSFORMER: dict(t_in=5, t_out=2, joints=3, d_model=8, heads=2, layers=2, ff=12),
}

NO_DROPOUT = {
    ArchKind.MLP: dict(dropout=0.0),
    ArchKind.LSTM: dict(dropout=0.0),
    ArchKind.CNNLSTM: dict(dropout=0.0, conv_dropout=0.0),
    ArchKind.TRANSFORMER: dict(dropout=0.0),
}


def small_model(kind, seed=0, **extra):
    return build_model(kind, seed=seed, **SMALL[ArchKind.parse(kind)], **extra)


def arch_grad_error(kind, seed=0, training=False, max_checks=None):
    """Max relative gradient error of forward+MSE for a reduced model on a 2-sample batch."""
    kind = ArchKind.parse(kind)
    extra = NO_DROPOUT[kind] if training else {}
    m = small_model(kind, seed=seed, **extra)
    rng = np.random.default_rng(seed + 100)
    # non-zero biases and affine params so every gradient path carries signal
    for name, p in m.params.items():
        if name.endswith((".b", ".b_ih", ".b_hh", ".b_in", ".b_out", ".beta")):
            p.data = (rng.standard_normal(p.shape) * 0.1).astype(np.float32)
        elif name.endswith(".gamma"):
            p.data = (1 + rng.standard_normal(p.shape) * 0.1).astype(np.float32)
    if m.buffers:
        m.train()
        for _ in range(3):   # give eval mode non-trivial running statistics
            forward(m, rng.standard_normal((4,) + m.input_shape).astype(np.float32))
    m.training = training
    x = tc.Tensor(rng.standard_normal((2,) + m.input_shape), requires_grad=True, dtype=np.float32)
    y = tc.Tensor(rng.standard_normal((2,) + m.output_shape) * 0.5, dtype=np.float64)

    def fn(*_):
        return tc.mse_loss(forward(m, x), y)

    return tc.grad_check(fn, [x] + m.parameters(), max_checks=max_checks, seed=seed)


def line_clip(clip_id, length, joints=17, velocity=0.01, seed=0):
    rng = np.random.default_rng(seed)
    base = rng.standard_normal((joints, 2))
    t = np.arange(length)[:, None, None]
    return MotionClip(clip_id, (base[None] + velocity * t * rng.standard_normal((joints, 2))).astype(np.float32))


# one line per acceptance criterion, printed in the pytest terminal summary
ACCEPTANCE_RESULTS = []


def record(number, title, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {title} -- {detail}"
    ACCEPTANCE_RESULTS.append(line)
    print(line, flush=True)
    assert ok, line
