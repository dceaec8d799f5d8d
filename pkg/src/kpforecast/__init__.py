"""Keypoint motion forecasting on plain numpy.

Four compact forecasters (MLP, LSTM, CNN-LSTM, Transformer) map 60 observed
frames of 17 COCO keypoints to the next 30 frames.  Training runs on a small
reverse-mode autodiff core in :mod:`kpforecast.tensor`.
"""

from .dataset import MotionClip, Window, load_clips, make_windows, normalize_frame, split
from .metrics import MetricsReport, frechet_distance, motion_fid, rmse_x100
from .models import ArchKind, build_model, count_params, forward, predict
from .training import TrainConfig, load_checkpoint, pretrain_finetune, save_checkpoint, train

__all__ = [
    "ArchKind", "MetricsReport", "MotionClip", "TrainConfig", "Window",
    "build_model", "count_params", "forward", "frechet_distance", "load_checkpoint",
    "load_clips", "make_windows", "motion_fid", "normalize_frame", "predict",
    "pretrain_finetune", "rmse_x100", "save_checkpoint", "split", "train",
]
