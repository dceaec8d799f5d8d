# %% [markdown]
# # Latency and keep-out envelopes

# %%
import numpy as np

from kpforecast.bench import measure_latency, report_table
from kpforecast.dataset import normalize_frames
from kpforecast.envelope import keepout_boxes, min_clearance, to_world
from kpforecast.models import ArchKind, build_model, predict
from kpforecast.synthgen import generate_real_like

reports = [measure_latency(build_model(k), warmup=10, iters=50) for k in ArchKind]
print(report_table(reports))

# %% [markdown]
# A forecast is mapped to world coordinates with the last observed frame's
# centroid and scale, then boxed per frame.

# %%
clip, _ = generate_real_like(1, seed=3)[0]
frames = clip.frames[:60] * 400 + np.array([640.0, 360.0], np.float32)   # pixel-like units
norm, cents, scales = normalize_frames(frames)
forecast = predict(build_model("lstm"), norm[None].astype(np.float32))[0]
world = to_world(forecast, cents[-1], scales[-1])
boxes, union = keepout_boxes(world, margin=20.0)
print("frame 1 box", boxes[0].to_dict())
print("union", union.to_dict())
print("clearance to (900, 300):", min_clearance(world, (900.0, 300.0)))
