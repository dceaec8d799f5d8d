"""Keep-out boxes and clearance queries over world-frame forecasts.

Forecasts come out of the models per-frame normalized.  The future
centroid and scale are unknown at inference time, so :func:`to_world`
holds the last observed frame's centroid and scale constant over the
horizon.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, ParameterError


@dataclass
class KeepOutBox:
    frame_index: int            # 1-based position in the horizon; 0 for the union box
    min: np.ndarray             # (x, y)
    max: np.ndarray
    margin: float

    def contains(self, point) -> bool:
        p = np.asarray(point, dtype=np.float64)
        return bool(np.all(p >= self.min) and np.all(p <= self.max))

    def to_dict(self):
        return {"frame": self.frame_index, "min": [float(v) for v in self.min],
                "max": [float(v) for v in self.max]}


def to_world(forecast, centroid, scale) -> np.ndarray:
    """Denormalize every forecast frame with one (centroid, scale) pair."""
    if not scale > 0:
        raise ParameterError("scale must be positive")
    return np.asarray(forecast, dtype=np.float64) * float(scale) + np.asarray(centroid, dtype=np.float64)


def _check(forecast):
    f = np.asarray(forecast, dtype=np.float64)
    if f.ndim != 3 or f.shape[-1] != 2 or f.shape[0] < 1:
        raise DimensionError(f"forecast must be [frames, joints, 2], got {list(f.shape)}")
    return f


def keepout_boxes(forecast, margin: float):
    """Per-frame axis-aligned boxes inflated by ``margin``, plus their union."""
    if margin < 0:
        raise ParameterError(f"margin must be non-negative, got {margin}")
    f = _check(forecast)
    lo = f.min(axis=1) - margin
    hi = f.max(axis=1) + margin
    boxes = [KeepOutBox(i + 1, lo[i], hi[i], margin) for i in range(len(f))]
    union = KeepOutBox(0, lo.min(axis=0), hi.max(axis=0), margin)
    return boxes, union


def min_clearance(forecast, point):
    """``(distance, frame_index, joint_index)`` of the closest predicted keypoint.

    ``frame_index`` is 1-based, ``joint_index`` 0-based; ties resolve to the
    earliest frame, then the lowest joint.
    """
    f = _check(forecast)
    d = np.sqrt(((f - np.asarray(point, dtype=np.float64)) ** 2).sum(axis=-1))
    flat = int(np.argmin(d))          # argmin returns the first minimum in row-major order
    fi, ji = divmod(flat, f.shape[1])
    return float(d[fi, ji]), fi + 1, ji
