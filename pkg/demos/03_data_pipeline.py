# %% [markdown]
# # Clips, normalization and windows
# Each frame is centred on its centroid and divided by its largest joint
# radius.  Targets use their own per-frame parameters, so the models learn
# body shape dynamics and the stored parameters map forecasts back.

# %%
import numpy as np

from kpforecast import dataset as ds
from kpforecast.synthgen import generate_corpus

corpus = generate_corpus("9k", seed=0, count=6, length=120)
clips = [c for c, _ in corpus]
frame = clips[0].frames[0]
norm, centroid, scale = ds.normalize_frame(frame)
print("centroid", centroid, "scale", round(scale, 4))
print("normalized centroid", norm.mean(axis=0).round(12), "max radius", np.sqrt((norm ** 2).sum(1)).max())

# %%
moved = 3.0 * frame + np.array([250.0, -40.0])
print("invariant:", np.abs(ds.normalize_frame(moved)[0] - norm).max())

# %% [markdown]
# Sliding windows with step 1 give `len - 89` windows per clip.

# %%
windows = ds.windows_from_clips(clips)
print(len(windows), "windows;", ds.window_count(120), "per clip")
train_w, test_w = ds.split(windows, 0.8, seed=0, by_clip=True)
print("by-clip split", len(train_w), len(test_w))
