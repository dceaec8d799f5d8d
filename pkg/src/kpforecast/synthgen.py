"""Procedural 17-joint motion corpora used for pretraining.

Clips are built from a canonical COCO-ordered skeleton driven by per-joint
sinusoidal oscillators, a shared whole-body sway and Gaussian jitter.
Three behaviour classes differ in which joints move, how far and how
fast.  A "real-like" family uses shifted priors and more noise so that
pretraining on the tiers has a domain gap to cross.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataset import MotionClip, save_clips
from .errors import ParameterError

FPS = 30.0
NYQUIST = FPS / 2

JOINT_NAMES = (
    "nose", "left_eye", "right_eye", "left_ear", "right_ear",
    "left_shoulder", "right_shoulder", "left_elbow", "right_elbow",
    "left_wrist", "right_wrist", "left_hip", "right_hip",
    "left_knee", "right_knee", "left_ankle", "right_ankle",
)

# y up, roughly unit body height
BASE_SKELETON = np.array([
    [0.00, 1.60], [0.05, 1.65], [-0.05, 1.65], [0.11, 1.62], [-0.11, 1.62],
    [0.20, 1.40], [-0.20, 1.40], [0.30, 1.12], [-0.30, 1.12],
    [0.34, 0.86], [-0.34, 0.86], [0.12, 0.90], [-0.12, 0.90],
    [0.14, 0.50], [-0.14, 0.50], [0.15, 0.08], [-0.15, 0.08],
])

BEHAVIORS = ("enthusiastic", "laughing", "happy_to_see_you")

HEAD = [0, 1, 2, 3, 4]
SHOULDERS = [5, 6]
L_ARM, R_ARM = [7, 9], [8, 10]
HIPS = [11, 12]
LEGS = [13, 14, 15, 16]

# per class: main frequency range (Hz) and amplitude template [17, 2]
_TEMPLATES = {}


def _template(behavior):
    if behavior in _TEMPLATES:
        return _TEMPLATES[behavior]
    amp = np.zeros((17, 2))
    if behavior == 0:       # both arms pumping with a body bounce
        amp[[7, 8]] = [0.10, 0.16]
        amp[[9, 10]] = [0.16, 0.34]
        amp[HEAD + SHOULDERS + HIPS, 1] = 0.04
        amp[LEGS, 1] = 0.02
        f_range = (1.5, 2.5)
    elif behavior == 1:     # fast head/shoulder shaking, arms hugging torso
        amp[HEAD] = [0.05, 0.04]
        amp[SHOULDERS] = [0.03, 0.03]
        amp[[7, 8, 9, 10]] = [0.04, 0.03]
        f_range = (3.0, 5.0)
    elif behavior == 2:     # one-arm wave with a nod
        amp[8] = [0.10, 0.08]
        amp[10] = [0.30, 0.12]
        amp[HEAD, 1] = 0.03
        amp[[6], 1] = 0.02
        f_range = (1.0, 2.0)
    else:
        raise ParameterError(f"unknown behaviour id {behavior}")
    _TEMPLATES[behavior] = (amp, f_range)
    return amp, f_range


@dataclass
class BehaviorSpec:
    behavior_id: int
    base: np.ndarray            # [17, 2] joint positions
    amplitude: np.ndarray       # [17, 2]
    frequency: np.ndarray       # [17] Hz
    phase: np.ndarray           # [17, 2] rad
    sway_amplitude: np.ndarray  # [2]
    sway_frequency: float
    noise_sigma: float = 0.0

    def validate(self):
        if np.any(np.asarray(self.amplitude) < 0) or np.any(np.asarray(self.sway_amplitude) < 0):
            raise ParameterError("oscillator amplitudes must be non-negative")
        freqs = np.append(np.asarray(self.frequency, dtype=float).ravel(), self.sway_frequency)
        if np.any(freqs <= 0) or np.any(freqs >= NYQUIST):
            raise ParameterError(f"frequencies must lie in (0, {NYQUIST}) Hz")
        if self.noise_sigma < 0:
            raise ParameterError("noise_sigma must be non-negative")


class CorpusTier(enum.IntEnum):
    T9K = 9000
    T45K = 45000
    T90K = 90000

    @classmethod
    def parse(cls, value) -> "CorpusTier":
        if isinstance(value, cls):
            return value
        key = str(value).lower().strip()
        table = {"9k": cls.T9K, "45k": cls.T45K, "90k": cls.T90K}
        if key in table:
            return table[key]
        try:
            return cls(int(key))
        except ValueError:
            raise ParameterError(f"unknown corpus tier {value!r}") from None


def static_spec(base=BASE_SKELETON, behavior_id=0) -> BehaviorSpec:
    """A spec with every oscillator switched off."""
    return BehaviorSpec(behavior_id, np.array(base, dtype=float), np.zeros((17, 2)), np.ones(17),
                        np.zeros((17, 2)), np.zeros(2), 0.5, 0.0)


def sample_behavior(behavior_id: int, rng: np.random.Generator, real_like: bool = False) -> BehaviorSpec:
    """Draw oscillator parameters from the class prior."""
    template, (f_lo, f_hi) = _template(behavior_id)
    if real_like:
        f_lo, f_hi = 1.2 * f_lo, 1.25 * f_hi
    f0 = rng.uniform(f_lo, f_hi)
    gain = rng.uniform(0.7, 1.3, size=(17, 1)) * (1.25 if real_like else 1.0)
    amplitude = template * gain
    frequency = np.full(17, f0)
    if behavior_id == 0:
        frequency[HEAD + SHOULDERS + HIPS + LEGS] = min(2 * f0, NYQUIST - 1)
    base_phase = rng.uniform(0, 2 * np.pi)
    # neighbouring joints lag a little behind the limb ends; x leads y by ~90 degrees
    lag = rng.uniform(0.0, 0.6, size=(17, 1))
    phase = base_phase - lag + np.array([[np.pi / 2, 0.0]]) + rng.normal(0, 0.15, size=(17, 2))
    if behavior_id == 0 and rng.random() < 0.5:
        phase[[7, 9]] += np.pi          # alternate arms
    base = BASE_SKELETON * rng.uniform(0.9, 1.1) + rng.normal(0, 0.01, size=(17, 2))
    sway = rng.uniform(0.0, 0.05, size=2)
    return BehaviorSpec(
        behavior_id=behavior_id,
        base=base,
        amplitude=amplitude,
        frequency=frequency,
        phase=phase,
        sway_amplitude=sway,
        sway_frequency=rng.uniform(0.2, 0.6),
        noise_sigma=rng.uniform(0.008, 0.012) if real_like else 0.002,
    )


def generate_clip(spec: BehaviorSpec, length: int = 90, seed: int = 0, clip_id: str = "clip") -> MotionClip:
    """Render ``length`` frames at 30 FPS; deterministic in ``(spec, seed)``."""
    spec.validate()
    if length < 1:
        raise ParameterError("clip length must be positive")
    t = np.arange(length, dtype=np.float64)[:, None, None] / FPS
    freq = np.asarray(spec.frequency, dtype=float).reshape(1, -1, 1)
    joints = spec.base[None] + spec.amplitude[None] * np.sin(2 * np.pi * freq * t + spec.phase[None])
    sway = spec.sway_amplitude * np.sin(2 * np.pi * spec.sway_frequency * t[:, 0, :])
    joints = joints + sway[:, None, :]
    if spec.noise_sigma > 0:
        joints = joints + np.random.default_rng(seed).normal(0, spec.noise_sigma, size=joints.shape)
    return MotionClip(clip_id, joints.astype(np.float32))


# SeedSequence spawn keys keep corpus streams disjoint from plain integer seeds
_CORPUS_STREAM = 0x5EED
_REAL_STREAM = 0x4EA1


def _clip_rng(seed, stream, i):
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(stream, i)))


def _generate(n, seed, stream, prefix, length, real_like):
    out = []
    for i in range(n):
        rng = _clip_rng(seed, stream, i)
        behavior = i % len(BEHAVIORS)
        spec = sample_behavior(behavior, rng, real_like=real_like)
        clip = generate_clip(spec, length, seed=int(rng.integers(2**63)), clip_id=f"{prefix}{i:06d}")
        out.append((clip, behavior))
    return out


def generate_corpus(tier, seed: int = 0, length: int = 90, count: int | None = None):
    """Pretraining corpus: ``tier`` clips (or ``count``), classes in round-robin order."""
    n = int(CorpusTier.parse(tier)) if count is None else int(count)
    return _generate(n, seed, _CORPUS_STREAM, f"syn{seed}_", length, real_like=False)


def generate_real_like(n_clips: int, seed: int = 0, length: int = 120):
    """Held-out target family with shifted frequency/amplitude priors and more jitter."""
    return _generate(n_clips, seed, _REAL_STREAM, f"real{seed}_", length, real_like=True)


def write_corpus(corpus, out_dir) -> None:
    """Write ``clips.jsonl`` and the ``labels.jsonl`` sidecar into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_clips([c for c, _ in corpus], out / "clips.jsonl")
    with open(out / "labels.jsonl", "w", encoding="utf-8") as fh:
        for clip, behavior in corpus:
            fh.write(json.dumps({"clip_id": clip.clip_id, "behavior": int(behavior)}) + "\n")
