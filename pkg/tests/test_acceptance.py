"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Run on its own with ``pytest tests/test_acceptance.py -v -s``; the lines are
also collected into an "acceptance criteria" section of the pytest summary.
Criteria 6 and 7 train real models and take several minutes on one core.
"""

import json
import statistics
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest
from helpers import SMALL, arch_grad_error, record
from test_tensor import OP_CASES

from kpforecast import dataset as ds
from kpforecast import tensor as tc
from kpforecast.bench import measure_latency
from kpforecast.metrics import GaussianStats, baseline_predict, frechet_distance, rmse_x100, sqrtm_psd
from kpforecast.models import ArchKind, build_model, count_params, forward
from kpforecast.synthgen import generate_corpus, generate_real_like
from kpforecast.training import TrainConfig, load_checkpoint, pretrain_finetune, save_checkpoint, train


# 1 ----------------------------------------------------------------------------

def test_criterion_1_parameter_counts():
    expected = {ArchKind.CNNLSTM: 592_060, ArchKind.LSTM: 347_644,
                ArchKind.MLP: 2_914_428, ArchKind.TRANSFORMER: 3_430_140}
    t0 = time.perf_counter()
    got = {k: count_params(build_model(k)) for k in expected}
    elapsed = time.perf_counter() - t0
    ok = got == expected and elapsed < 1.0
    record(1, "parameter counts", ok,
           ", ".join(f"{k.value}={v:,}" for k, v in got.items()) + f" in {elapsed:.2f}s")


# 2 ----------------------------------------------------------------------------

def test_criterion_2_gradients():
    t0 = time.perf_counter()
    worst_op = max((tc.grad_check(*OP_CASES[op](np.random.default_rng(seed))), op)
                   for op in OP_CASES for seed in range(10))
    worst_arch = max((arch_grad_error(kind, training=training), f"{kind.value}/{'train' if training else 'eval'}")
                     for kind in ArchKind for training in (False, True))
    elapsed = time.perf_counter() - t0
    ok = worst_op[0] < 1e-3 and worst_arch[0] < 1e-3 and elapsed < 120
    record(2, "gradient correctness", ok,
           f"max op error {worst_op[0]:.2e} ({worst_op[1]}), max architecture error "
           f"{worst_arch[0]:.2e} ({worst_arch[1]}), {elapsed:.1f}s")


# 3 ----------------------------------------------------------------------------

def test_criterion_3_normalization_invariance():
    rng = np.random.default_rng(2024)
    worst_inv = worst_rt = 0.0
    for _ in range(1000):
        frame = rng.uniform(0, 1920, size=(17, 2))
        s = rng.uniform(0.1, 10)
        t = rng.uniform(-1000, 1000, size=2)
        moved = s * frame + t
        a = ds.normalize_frame(frame)[0]
        b, c, sc = ds.normalize_frame(moved)
        worst_inv = max(worst_inv, np.abs(a - b).max())
        worst_rt = max(worst_rt, np.abs(ds.denormalize_frame(b, c, sc) - moved).max())
    ok = worst_inv <= 1e-6 and worst_rt <= 1e-6
    record(3, "normalization invariance", ok, f"max |diff| {worst_inv:.2e}, max round-trip error {worst_rt:.2e}")


# 4 ----------------------------------------------------------------------------

def _enumerate_starts(length, step, t_in=60, t_out=30):
    starts, s = [], 0
    while s + t_in + t_out <= length:
        starts.append(s)
        s += step
    return starts


def test_criterion_4_window_and_split_arithmetic():
    rng = np.random.default_rng(4)
    pairs = list(zip(rng.integers(0, 400, 500), rng.integers(1, 50, 500)))
    mismatches = 0
    for length, step in pairs:
        expect = _enumerate_starts(int(length), int(step))
        if ds.window_count(int(length), 60, 30, int(step)) != len(expect):
            mismatches += 1
    # the real windowing routine on a subset, including start positions
    for length, step in pairs[:60]:
        clip = ds.MotionClip("c", rng.standard_normal((int(length), 17, 2)).astype(np.float32)) if length else None
        if clip is None:
            continue
        got = [w.source[1] for w in ds.make_windows(clip, step=int(step))]
        mismatches += got != _enumerate_starts(int(length), int(step))
    bad_splits = 0
    for n, seed in zip(rng.integers(0, 300, 100), range(100)):
        frac = float(rng.uniform(0.05, 0.95))
        tr, te = ds.split(list(range(int(n))), frac, seed=seed)
        if sorted(tr + te) != list(range(int(n))) or len(tr) != int(np.ceil(n * frac)):
            bad_splits += 1
    ok = mismatches == 0 and bad_splits == 0
    record(4, "window/split arithmetic", ok,
           f"{len(pairs)} (len, step) pairs, {mismatches} count mismatches, {bad_splits} bad partitions")


# 5 ----------------------------------------------------------------------------

def test_criterion_5_fid_analytic():
    rng = np.random.default_rng(5)
    errs = {}
    M = rng.standard_normal((12, 12))
    a = GaussianStats(rng.standard_normal(12), M @ M.T + np.eye(12))
    errs["identical"] = abs(frechet_distance(a, a))
    d = rng.standard_normal(20)
    errs["mean shift"] = abs(frechet_distance(GaussianStats(np.zeros(20), np.eye(20)),
                                              GaussianStats(d, np.eye(20))) - d @ d)
    n = 32
    errs["isotropic"] = abs(frechet_distance(GaussianStats(np.zeros(n), 4 * np.eye(n)),
                                             GaussianStats(np.zeros(n), 9 * np.eye(n))) - n)
    recon = 0.0
    for F in list(range(1, 65, 7)) + [64]:
        B = rng.standard_normal((F, F))
        A = B.T @ B
        R = sqrtm_psd(A)
        recon = max(recon, np.linalg.norm(R @ R - A) / np.linalg.norm(A))
    ok = max(errs.values()) <= 1e-9 and recon <= 1e-8
    record(5, "FID analytic cases", ok,
           ", ".join(f"{k} err {v:.1e}" for k, v in errs.items()) + f", sqrtm rel err {recon:.1e} (F<=64)")


# 6 ----------------------------------------------------------------------------

@pytest.mark.slow
def test_criterion_6_training_sanity():
    clips = [c for c, _ in generate_corpus("9k", seed=6, count=100, length=94)]
    windows = ds.windows_from_clips(clips)
    train_w, test_w = ds.split(windows, 0.8, seed=0, by_clip=True)
    X, Y = ds.stack_windows(train_w)
    Xt, Yt = ds.stack_windows(test_w)
    copy_last = rmse_x100(baseline_predict(Xt), Yt)
    t0 = time.perf_counter()
    parts, ok = [], len(windows) >= 500
    for kind in (ArchKind.LSTM, ArchKind.CNNLSTM, ArchKind.TRANSFORMER):
        model = build_model(kind, seed=0)
        hist = train(model, (X, Y), (Xt, Yt), TrainConfig.for_arch(kind, epochs=50, seed=0))
        ratio = hist.train_loss[-1] / hist.train_loss[0]
        held_out = hist.eval_rmse_x100[-1]
        ok &= ratio < 0.5 and held_out < copy_last
        parts.append(f"{kind.value} loss ratio {ratio:.3f} rmse {held_out:.2f}")
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 600
    record(6, "training sanity", ok,
           f"{len(windows)} windows; " + "; ".join(parts) + f"; copy_last {copy_last:.2f}; {elapsed:.0f}s")


# 7 ----------------------------------------------------------------------------

@pytest.mark.slow
def test_criterion_7_pretraining_trend():
    synth = ds.windows_from_clips([c for c, _ in generate_corpus("9k", seed=0)])
    real = ds.windows_from_clips([c for c, _ in generate_real_like(150, seed=100, length=100)])
    real_train, real_test = ds.split(real, 0.8, seed=0, by_clip=True)
    scratch, pretrained = [], []
    t0 = time.perf_counter()
    for seed in (0, 1, 2):
        # decoupled weight decay: coupled L2 at 1e-4 pins both arms to the mean pose
        kw = dict(seed=seed, decoupled_weight_decay=True)
        model, _, fine = pretrain_finetune("lstm", synth, real_train, real_test,
                                           TrainConfig.for_arch("lstm", epochs=6, **kw),
                                           TrainConfig.for_arch("lstm", epochs=10, **kw))
        pretrained.append(fine.eval_rmse_x100[-1])
        base = build_model("lstm", seed=seed)
        scratch.append(train(base, real_train, real_test, TrainConfig.for_arch("lstm", epochs=10, **kw))
                       .eval_rmse_x100[-1])
    med_p, med_s = statistics.median(pretrained), statistics.median(scratch)
    record(7, "pretraining trend", med_p <= med_s,
           f"median pretrained {med_p:.2f} vs scratch {med_s:.2f} "
           f"(pretrained {[round(v, 2) for v in pretrained]}, scratch {[round(v, 2) for v in scratch]}, "
           f"{time.perf_counter() - t0:.0f}s)")


# 8 ----------------------------------------------------------------------------

def test_criterion_8_checkpoint_round_trip(tmp_path):
    rng = np.random.default_rng(8)
    mismatched = []
    for kind in ArchKind:
        model = build_model(kind, seed=8).train()
        forward(model, rng.standard_normal((4, 60, 17, 2)).astype(np.float32))  # non-trivial running stats
        model.eval()
        xs = [rng.standard_normal((1, 60, 17, 2)).astype(np.float32) for _ in range(10)]
        before = [forward(model, x).data.copy() for x in xs]
        path = tmp_path / f"{kind.value}.kpfc"
        save_checkpoint(model, None, path)
        loaded, _ = load_checkpoint(path)
        if not all(np.array_equal(forward(loaded, x).data, b) for x, b in zip(xs, before)):
            mismatched.append(kind.value)
    record(8, "checkpoint round trip", not mismatched,
           "bitwise-identical forwards on 10 inputs x 4 architectures" if not mismatched
           else f"mismatch for {mismatched}")


# 9 ----------------------------------------------------------------------------

def test_criterion_9_latency_harness():
    stamps = iter(np.cumsum([0] + [3_000_000, 1] * 10).tolist())
    fake = measure_latency(build_model("lstm", **{k: v for k, v in SMALL[ArchKind.LSTM].items()}),
                           warmup=2, iters=10, clock=lambda: int(next(stamps)))
    exact = (fake.mean_ms, fake.p50_ms, fake.p99_ms, fake.fps) == (3.0, 3.0, 3.0, 1000.0 / 3.0)
    parts, consistent = [], True
    for kind in ArchKind:
        r = measure_latency(build_model(kind, seed=0), warmup=100, iters=1000)
        consistent &= abs(r.fps * r.mean_ms - 1000.0) <= 1e-9 * 1000.0 and r.iters == 1000
        parts.append(f"{kind.value} {r.mean_ms:.2f}ms")
    record(9, "latency harness", exact and consistent,
           f"injected clock exact={exact}; real clock fps*mean=1000: {consistent}; " + ", ".join(parts))


# 10 ---------------------------------------------------------------------------

def _cli(*args):
    return subprocess.run([sys.executable, "-m", "kpforecast", *map(str, args)], capture_output=True, text=True)


def test_criterion_10_cli_smoke(tmp_path):
    t0 = time.perf_counter()
    steps, failures = [], []

    def step(name, *args):
        res = _cli(*args)
        steps.append(name)
        if res.returncode != 0:
            failures.append(f"{name} exit {res.returncode}: {res.stderr.strip()[-200:]}")
        return res

    syn, ckpt = tmp_path / "syn", tmp_path / "m.kpfc"
    step("synth", "synth", "--tier", "9k", "--seed", "0", "--out", syn)
    labels = [json.loads(l) for l in (syn / "labels.jsonl").open()]
    if len(labels) != 9000 or not all(set(l) == {"clip_id", "behavior"} for l in labels):
        failures.append("synth labels schema")
    step("train", "train", "--arch", "lstm", "--data", syn, "--epochs", "2", "--seed", "0", "--out", ckpt)
    step("eval", "eval", "--ckpt", ckpt, "--data", syn, "--json", tmp_path / "eval.json")
    report = json.loads((tmp_path / "eval.json").read_text())
    if set(report) != {"rmse_x100", "fid", "n"} or not (np.isfinite(report["rmse_x100"]) and report["rmse_x100"] > 0
                                                        and np.isfinite(report["fid"]) and report["fid"] >= 0):
        failures.append(f"eval report {report}")
    step("bench", "bench", "--arch", "all", "--json", tmp_path / "bench.json")
    rows = json.loads((tmp_path / "bench.json").read_text())
    if [r["arch"] for r in rows] != [k.value for k in ArchKind] or any(r["fps"] <= 0 for r in rows):
        failures.append("bench json schema")
    probe = tmp_path / "probe.jsonl"
    ds.save_clips(ds.load_dir(syn)[:3], probe)
    step("forecast", "forecast", "--ckpt", ckpt, "--in", probe, "--out", tmp_path / "forecast.jsonl")
    fc = [json.loads(l) for l in (tmp_path / "forecast.jsonl").open()]
    if len(fc) != 3 * (90 - 59) or any(np.asarray(r["forecast"]).shape != (30, 17, 2) or
                                       not np.all(np.isfinite(r["forecast"])) for r in fc):
        failures.append("forecast schema")
    step("envelope", "envelope", "--ckpt", ckpt, "--in", probe, "--margin", "0.05", "--out", tmp_path / "env.jsonl")
    env = [json.loads(l) for l in (tmp_path / "env.jsonl").open()]
    per_frame = [r for r in env if "frame" in r]
    unions = [r for r in env if "union" in r]
    if (len(per_frame) != 90 or len(unions) != 3
            or any(len(r["min"]) != 2 or len(r["max"]) != 2 for r in per_frame)):
        failures.append("envelope schema")
    elapsed = time.perf_counter() - t0
    ok = not failures and elapsed < 300
    record(10, "end-to-end CLI smoke", ok,
           f"{' -> '.join(steps)} in {elapsed:.0f}s" + (f"; failures: {failures}" if failures else ""))


if __name__ == "__main__":
    sys.exit(pytest.main([str(Path(__file__)), "-v", "-s"]))
