"""Forecast error metrics, Frechet distance and trivial baselines.

All arithmetic is float64.  FID here is the Frechet distance between
Gaussians fitted to raw flattened normalized sequences (30 * 17 * 2 =
1020 features); no learned feature extractor is involved, so absolute
values are not comparable with image-feature FIDs.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from .errors import ContractError, DimensionError, ParameterError


@dataclass
class GaussianStats:
    mean: np.ndarray
    cov: np.ndarray

    @property
    def dim(self):
        return self.mean.shape[0]


@dataclass
class MetricsReport:
    rmse_x100: float
    fid: float
    n: int

    def to_json(self) -> str:
        return json.dumps(asdict(self))


def rmse_x100(preds, targets) -> float:
    p = np.asarray(preds, dtype=np.float64)
    t = np.asarray(targets, dtype=np.float64)
    if p.shape != t.shape:
        raise DimensionError(f"prediction shape {p.shape} != target shape {t.shape}")
    if p.size == 0:
        raise DimensionError("rmse needs at least one sample")
    return float(100.0 * np.sqrt(np.mean((p - t) ** 2)))


def gaussian_stats(samples) -> GaussianStats:
    x = np.asarray(samples, dtype=np.float64)
    if x.ndim != 2:
        raise DimensionError(f"samples must be [N, F], got {x.shape}")
    if x.shape[0] < 2:
        raise ParameterError("need at least two samples for a covariance")
    mean = x.mean(axis=0)
    xc = x - mean
    cov = xc.T @ xc / (x.shape[0] - 1)
    return GaussianStats(mean, (cov + cov.T) / 2)


def sqrtm_psd(S, sym_tol: float = 1e-9) -> np.ndarray:
    """Principal square root of a symmetric PSD matrix via eigendecomposition.

    Negative eigenvalues (round-off) are clamped to zero.
    """
    S = np.asarray(S, dtype=np.float64)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise DimensionError(f"expected a square matrix, got {S.shape}")
    if np.max(np.abs(S - S.T), initial=0.0) > sym_tol * max(1.0, np.max(np.abs(S), initial=0.0)):
        raise ContractError("sqrtm_psd needs a symmetric matrix")
    w, V = np.linalg.eigh((S + S.T) / 2)
    root = (V * np.sqrt(np.clip(w, 0.0, None))) @ V.T
    return (root + root.T) / 2


def _regularize(cov):
    """Add ``eps * I`` only when the covariance is numerically singular."""
    F = cov.shape[0]
    eps = 1e-6 * max(1.0, np.trace(cov) / F)
    if np.linalg.eigvalsh(cov)[0] < eps:
        return cov + eps * np.eye(F)
    return cov


def frechet_distance(a: GaussianStats, b: GaussianStats) -> float:
    if a.dim != b.dim or a.cov.shape != b.cov.shape:
        raise DimensionError(f"feature dims differ: {a.dim} vs {b.dim}")
    ca, cb = _regularize(a.cov), _regularize(b.cov)
    ra = sqrtm_psd(ca)
    mid = ra @ cb @ ra
    cross = sqrtm_psd((mid + mid.T) / 2)
    diff = a.mean - b.mean
    d = float(diff @ diff + np.trace(ca) + np.trace(cb) - 2.0 * np.trace(cross))
    return max(d, 0.0)


def motion_fid(preds, refs) -> float:
    p = np.asarray(preds, dtype=np.float64)
    r = np.asarray(refs, dtype=np.float64)
    if p.shape[1:] != r.shape[1:]:
        raise DimensionError(f"sequence shapes differ: {p.shape[1:]} vs {r.shape[1:]}")
    return frechet_distance(gaussian_stats(p.reshape(len(p), -1)), gaussian_stats(r.reshape(len(r), -1)))


def baseline_predict(inputs, kind: str = "copy_last", horizon: int = 30) -> np.ndarray:
    """Copy-last or constant-velocity forecast for a window, ``[t_in, J, 2]`` or ``[N, t_in, J, 2]``."""
    inputs = getattr(inputs, "input", inputs)
    x = np.asarray(inputs, dtype=np.float64)
    batched = x.ndim == 4
    if not batched:
        x = x[None]
    last = x[:, -1:]
    if kind == "copy_last":
        out = np.repeat(last, horizon, axis=1)
    elif kind == "const_velocity":
        v = x[:, -1:] - x[:, -2:-1]
        steps = np.arange(1, horizon + 1, dtype=np.float64)[None, :, None, None]
        out = last + steps * v
    else:
        raise ParameterError(f"unknown baseline {kind!r}")
    return out if batched else out[0]


def evaluate(preds, targets) -> MetricsReport:
    return MetricsReport(rmse_x100(preds, targets), motion_fid(preds, targets), int(len(preds)))
