# %% [markdown]
# # Training an LSTM on synthetic motion
# A short run on a small corpus; compare against the trivial baselines.

# %%
from kpforecast import dataset as ds
from kpforecast.metrics import baseline_predict, evaluate, rmse_x100
from kpforecast.models import build_model, predict
from kpforecast.synthgen import generate_corpus
from kpforecast.training import TrainConfig, train

clips = [c for c, _ in generate_corpus("9k", seed=1, count=60, length=94)]
train_w, test_w = ds.split(ds.windows_from_clips(clips), 0.8, seed=0, by_clip=True)
Xt, Yt = ds.stack_windows(test_w)
print("copy_last", round(rmse_x100(baseline_predict(Xt), Yt), 2))
print("const_velocity", round(rmse_x100(baseline_predict(Xt, "const_velocity"), Yt), 2))

# %%
model = build_model("lstm", seed=0)
hist = train(model, train_w, test_w, TrainConfig.for_arch("lstm", epochs=8))
print("train loss", [round(v, 5) for v in hist.train_loss])
print("held-out rmse x100", [round(v, 2) for v in hist.eval_rmse_x100])

# %%
print(evaluate(predict(model, Xt), Yt).to_json())
