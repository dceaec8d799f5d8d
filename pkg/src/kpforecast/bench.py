"""Batch-1 inference latency measurement and a Table-1 style report."""

from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass

import numpy as np

from .errors import ParameterError
from .models import ArchKind, Model, count_params, forward


@dataclass
class LatencyReport:
    arch: str
    params: int
    mean_ms: float
    p50_ms: float
    p99_ms: float
    fps: float
    warmup: int
    iters: int

    def to_dict(self):
        return asdict(self)


def measure_latency(model: Model, warmup: int = 100, iters: int = 1000, seed: int = 0,
                    clock=time.perf_counter_ns) -> LatencyReport:
    """Time ``iters`` eval-mode forwards of one fixed random sample.

    ``clock`` returns integer nanoseconds from a monotonic source; tests
    inject a synthetic one.  Warm-up calls are not timed.
    """
    if iters < 1:
        raise ParameterError("iters must be at least 1")
    if warmup < 0:
        raise ParameterError("warmup must be non-negative")
    was = model.training
    model.eval()
    x = np.random.default_rng(seed).standard_normal((1,) + model.input_shape).astype(np.float32)
    try:
        for _ in range(warmup):
            forward(model, x)
        durations = np.empty(iters, dtype=np.int64)
        for i in range(iters):
            t0 = clock()
            forward(model, x)
            durations[i] = clock() - t0
    finally:
        model.training = was
    ms = durations / 1e6
    mean_ms = float(ms.mean())
    return LatencyReport(
        arch=model.kind.value,
        params=count_params(model),
        mean_ms=mean_ms,
        p50_ms=float(np.percentile(ms, 50)),
        p99_ms=float(np.percentile(ms, 99)),
        fps=1000.0 / mean_ms if mean_ms > 0 else float("inf"),
        warmup=warmup,
        iters=iters,
    )


_ORDER = {k.value: i for i, k in enumerate(ArchKind)}
_LABELS = {"mlp": "MLP", "lstm": "LSTM", "cnnlstm": "CNN-LSTM", "transformer": "Transformer"}


def report_table(reports) -> str:
    rows = sorted(reports, key=lambda r: _ORDER.get(r.arch, len(_ORDER)))
    header = ("Model", "Params", "mean ms", "FPS")
    body = [(_LABELS.get(r.arch, r.arch), f"{r.params:,}", f"{r.mean_ms:.3f}", f"{r.fps:.0f}") for r in rows]
    widths = [max(len(row[i]) for row in [header] + body) for i in range(4)]
    lines = ["  ".join(h.ljust(w) if i == 0 else h.rjust(w) for i, (h, w) in enumerate(zip(header, widths)))]
    lines.append("  ".join("-" * w for w in widths))
    for row in body:
        lines.append("  ".join(c.ljust(w) if i == 0 else c.rjust(w) for i, (c, w) in enumerate(zip(row, widths))))
    return "\n".join(lines)


def report_json(reports) -> str:
    rows = sorted(reports, key=lambda r: _ORDER.get(r.arch, len(_ORDER)))
    return json.dumps([r.to_dict() for r in rows], indent=2)
