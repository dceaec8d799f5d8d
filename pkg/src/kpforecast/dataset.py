"""Keypoint clip ingestion, per-frame normalization and sliding windows.

Each frame is centred on its keypoint centroid and divided by its largest
keypoint radius.  Target frames are normalized by their *own* centroid and
scale, so models forecast body shape dynamics rather than global
translation; the stored per-frame parameters map forecasts back to world
coordinates.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import GapError, NumericError, ParameterError, ParseError, SchemaError

N_JOINTS = 17
DEGENERATE_SCALE = 1e-9


@dataclass
class MotionClip:
    clip_id: str
    frames: np.ndarray          # [T, 17, 2] float32
    fps: float = 30.0
    first_frame: int = 0        # source index of frames[0]

    def __len__(self):
        return len(self.frames)


@dataclass
class DenormParams:
    centroids: np.ndarray       # [N, 2]
    scales: np.ndarray          # [N]


@dataclass
class Window:
    input: np.ndarray           # [t_in, 17, 2] float32
    target: np.ndarray          # [t_out, 17, 2] float32
    denorm: DenormParams        # t_in + t_out entries
    source: tuple               # (clip_id, start)


# --------------------------------------------------------------------------
# file I/O


def load_clips(path) -> list[MotionClip]:
    """Read a JSON Lines keypoint file, one frame per line.

    Lines look like ``{"clip_id": str, "frame": int, "kp": [[x, y] x 17]}``
    and clips may be interleaved.  Frames of each clip must form a
    contiguous index range.
    """
    per_clip: dict[str, dict[int, np.ndarray]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                clip_id, frame, kp = rec["clip_id"], rec["frame"], rec["kp"]
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise ParseError(f"malformed record ({exc})", line=lineno) from None
            if not isinstance(clip_id, str) or not isinstance(frame, int) or isinstance(frame, bool):
                raise ParseError("clip_id must be a string and frame an integer", line=lineno)
            try:
                arr = np.asarray(kp, dtype=np.float64)
            except (TypeError, ValueError):
                raise SchemaError("keypoints must be numeric [x, y] pairs", line=lineno) from None
            if arr.shape != (N_JOINTS, 2):
                n = arr.shape[0] if arr.ndim >= 1 else 0
                raise SchemaError(f"expected {N_JOINTS} [x, y] keypoints, got shape {list(arr.shape)} "
                                  f"({n} keypoints)", line=lineno)
            if not np.all(np.isfinite(arr)):
                raise SchemaError("non-finite keypoint coordinate", line=lineno)
            frames = per_clip.setdefault(clip_id, {})
            if frame in frames:
                raise ParseError(f"duplicate frame {frame} for clip {clip_id!r}", line=lineno)
            frames[frame] = arr.astype(np.float32)
    clips = []
    for clip_id, frames in per_clip.items():
        idx = sorted(frames)
        if idx[-1] - idx[0] + 1 != len(idx):
            missing = sorted(set(range(idx[0], idx[-1] + 1)) - set(idx))
            raise GapError(f"clip {clip_id!r} is missing frames {missing[:5]}")
        clips.append(MotionClip(clip_id, np.stack([frames[i] for i in idx]), first_frame=idx[0]))
    return clips


def _fmt(v):
    return float(np.float32(v))


def clip_records(clip: MotionClip):
    for i, frame in enumerate(clip.frames):
        yield {"clip_id": clip.clip_id, "frame": clip.first_frame + i, "kp": [[_fmt(x), _fmt(y)] for x, y in frame]}


def save_clips(clips, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for clip in clips:
            for rec in clip_records(clip):
                fh.write(json.dumps(rec, separators=(",", ":")) + "\n")


# --------------------------------------------------------------------------
# normalization


def normalize_frame(frame):
    """Return ``(normalized, centroid, scale)`` for one ``[17, 2]`` frame.

    Computed in float64.  A collapsed frame (scale below 1e-9) keeps
    ``scale = 1`` so it is only centred.
    """
    p = np.asarray(frame, dtype=np.float64)
    if p.shape != (N_JOINTS, 2):
        raise SchemaError(f"frame must be [{N_JOINTS}, 2], got {list(p.shape)}")
    if not np.all(np.isfinite(p)):
        raise NumericError("frame contains non-finite coordinates")
    centroid = p.mean(axis=0)
    centered = p - centroid
    scale = float(np.sqrt((centered ** 2).sum(axis=1)).max())
    if scale < DEGENERATE_SCALE:
        scale = 1.0
    return centered / scale, centroid, scale


def normalize_frames(frames):
    """Vectorized :func:`normalize_frame` over ``[T, 17, 2]``."""
    p = np.asarray(frames, dtype=np.float64)
    if not np.all(np.isfinite(p)):
        raise NumericError("frames contain non-finite coordinates")
    centroids = p.mean(axis=1)
    centered = p - centroids[:, None]
    scales = np.sqrt((centered ** 2).sum(axis=2)).max(axis=1)
    scales = np.where(scales < DEGENERATE_SCALE, 1.0, scales)
    return centered / scales[:, None, None], centroids, scales


def denormalize_frame(frame, centroid, scale):
    if not scale > 0:
        raise ParameterError(f"scale must be positive, got {scale}")
    return np.asarray(frame, dtype=np.float64) * scale + np.asarray(centroid, dtype=np.float64)


def denormalize_frames(frames, centroids, scales):
    """Map ``[T, 17, 2]`` normalized frames back with per-frame (or shared) parameters."""
    scales = np.asarray(scales, dtype=np.float64)
    if np.any(scales <= 0):
        raise ParameterError("scales must be positive")
    centroids = np.asarray(centroids, dtype=np.float64)
    f = np.asarray(frames, dtype=np.float64)
    if scales.ndim == 0:
        return f * scales + centroids
    return f * scales[:, None, None] + centroids[:, None, :]


# --------------------------------------------------------------------------
# windows and splits


def window_count(length: int, t_in: int = 60, t_out: int = 30, step: int = 1) -> int:
    return max(0, (length - t_in - t_out) // step + 1)


def make_windows(clip: MotionClip, t_in: int = 60, t_out: int = 30, step: int = 1) -> list[Window]:
    if step < 1:
        raise ParameterError("window step must be at least 1")
    n = window_count(len(clip), t_in, t_out, step)
    if n == 0:
        return []
    norm, cents, scales = normalize_frames(clip.frames)
    norm = norm.astype(np.float32)
    span = t_in + t_out
    out = []
    for k in range(n):
        s = k * step
        out.append(Window(
            input=norm[s:s + t_in],
            target=norm[s + t_in:s + span],
            denorm=DenormParams(cents[s:s + span].copy(), scales[s:s + span].copy()),
            source=(clip.clip_id, s),
        ))
    return out


def windows_from_clips(clips, t_in=60, t_out=30, step=1) -> list[Window]:
    out = []
    for clip in sorted(clips, key=lambda c: c.clip_id):
        out.extend(make_windows(clip, t_in, t_out, step))
    return out


def stack_windows(windows):
    """``(inputs [N, t_in, 17, 2], targets [N, t_out, 17, 2])`` as float32 arrays."""
    if not windows:
        raise ParameterError("no windows to stack")
    return (np.stack([w.input for w in windows]).astype(np.float32),
            np.stack([w.target for w in windows]).astype(np.float32))


def split(windows, train_fraction: float = 0.8, seed: int = 0, by_clip: bool = False, warn: bool = False):
    """Seeded shuffle then prefix/suffix split with ``ceil(n * fraction)`` training items.

    ``by_clip`` shuffles and splits whole clips instead of windows, so no
    clip contributes to both sides.  Window-level splitting of step-1
    windows leaks neighbouring frames across the split; ``warn=True``
    emits a warning about it.
    """
    if not 0 < train_fraction < 1:
        raise ParameterError(f"train fraction must lie in (0, 1), got {train_fraction}")
    windows = list(windows)
    rng = np.random.default_rng(seed)
    if by_clip:
        ids = sorted({w.source[0] for w in windows})
        order = rng.permutation(len(ids))
        n_train = math.ceil(len(ids) * train_fraction)
        train_ids = {ids[i] for i in order[:n_train]}
        return ([w for w in windows if w.source[0] in train_ids],
                [w for w in windows if w.source[0] not in train_ids])
    if warn:
        warnings.warn("window-level split: overlapping windows of one clip can fall on both sides",
                      stacklevel=2)
    order = rng.permutation(len(windows))
    n_train = math.ceil(len(windows) * train_fraction)
    return [windows[i] for i in order[:n_train]], [windows[i] for i in order[n_train:]]


def load_dir(path) -> list[MotionClip]:
    """Clips stored by the ``synth`` command (``<dir>/clips.jsonl``) or a bare JSONL file."""
    p = Path(path)
    if p.is_dir():
        p = p / "clips.jsonl"
    return load_clips(p)
