# %% [markdown]
# # Pretraining on a synthetic tier, then finetuning
# The "real-like" family has faster, larger and noisier motion than the
# pretraining tiers.  This is a reduced version of the acceptance run.

# %%
from kpforecast import dataset as ds
from kpforecast.models import build_model
from kpforecast.synthgen import generate_corpus, generate_real_like
from kpforecast.training import TrainConfig, pretrain_finetune, train

synth = ds.windows_from_clips([c for c, _ in generate_corpus("9k", seed=0, count=1500)])
real = ds.windows_from_clips([c for c, _ in generate_real_like(60, seed=100, length=100)])
real_train, real_test = ds.split(real, 0.8, seed=0, by_clip=True)

cfg = dict(seed=0, decoupled_weight_decay=True)
_, pre, fine = pretrain_finetune("lstm", synth, real_train, real_test,
                                 TrainConfig.for_arch("lstm", epochs=3, **cfg),
                                 TrainConfig.for_arch("lstm", epochs=5, **cfg))
scratch = train(build_model("lstm", seed=0), real_train, real_test, TrainConfig.for_arch("lstm", epochs=5, **cfg))
print("pretrained", [round(v, 2) for v in fine.eval_rmse_x100])
print("scratch   ", [round(v, 2) for v in scratch.eval_rmse_x100])
