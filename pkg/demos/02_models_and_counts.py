# %% [markdown]
# # The four forecasters
# Each maps 60 observed frames of 17 (x, y) keypoints to the next 30 frames.

# %%
import numpy as np

from kpforecast.models import ArchKind, build_model, count_params, forward

for kind in ArchKind:
    m = build_model(kind, seed=0)
    print(f"{kind.value:12s} {count_params(m):>10,d} parameters")

# %% [markdown]
# One-shot decoding: a single head emits all 30 frames.

# %%
m = build_model("transformer").eval()
x = np.random.default_rng(0).standard_normal((2, 60, 17, 2)).astype(np.float32)
print(forward(m, x).shape)

# %% [markdown]
# Parameter names are stable, which the checkpoint format relies on.

# %%
print(list(build_model("cnnlstm").params)[:8])
