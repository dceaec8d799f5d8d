"""Command-line entry point: ``kpforecast <subcommand> ...``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric divergence.
Errors go to stderr as ``error[<code>]: <message>``.
"""

from __future__ import annotations

import argparse
import contextlib
import json
import logging
import sys
import warnings
from pathlib import Path

import numpy as np

from . import dataset, synthgen
from .bench import measure_latency, report_json, report_table
from .envelope import keepout_boxes, to_world
from .errors import (
    CheckpointFormatError,
    DataError,
    DimensionError,
    KPForecastError,
    NumericError,
    ParameterError,
    TrainingDiverged,
)
from .metrics import evaluate
from .models import ArchKind, build_model, predict
from .training import (
    TrainConfig,
    load_checkpoint,
    pretrain_finetune,
    read_checkpoint_header,
    save_checkpoint,
    train,
)

log = logging.getLogger("kpforecast")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3
ARCH_CHOICES = [k.value for k in ArchKind]


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _add_split_flags(p):
    p.add_argument("--step", type=int, default=1, help="sliding-window step in frames (default 1)")
    p.add_argument("--train-fraction", type=float, default=0.8, help="training share of the split (default 0.8)")
    p.add_argument("--split-by-clip", action="store_true",
                   help="split whole clips instead of windows (no temporal leakage)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="kpforecast", description="Keypoint motion forecasting toolkit.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)

    p = sub.add_parser("synth", help="generate a synthetic clip corpus")
    p.add_argument("--tier", choices=["9k", "45k", "90k"], default="9k", help="pretraining tier (default 9k)")
    p.add_argument("--seed", type=int, default=0, help="corpus seed (default 0)")
    p.add_argument("--out", required=True, help="output directory (clips.jsonl + labels.jsonl)")
    p.add_argument("--count", type=int, help="override the tier's clip count")
    p.add_argument("--length", type=int, help="frames per clip (default 90, real-like 120)")
    p.add_argument("--real-like", action="store_true",
                   help="draw from the shifted 'real-like' family instead (default 437 clips)")

    p = sub.add_parser("train", help="train one architecture on a clip directory")
    p.add_argument("--arch", required=True, choices=ARCH_CHOICES, help="architecture")
    p.add_argument("--data", required=True, help="clip directory or JSONL file")
    p.add_argument("--config", help="JSON file with TrainConfig fields")
    p.add_argument("--out", required=True, help="checkpoint path")
    p.add_argument("--epochs", type=int, help="override epochs")
    p.add_argument("--lr", type=float, help="override learning rate")
    p.add_argument("--batch-size", type=int, help="override batch size")
    p.add_argument("--seed", type=int, help="override seed (also the split seed)")
    p.add_argument("--history", help="write the per-epoch history as JSON here")
    _add_split_flags(p)

    p = sub.add_parser("pretrain-finetune", help="pretrain on synthetic clips, then finetune on real clips")
    p.add_argument("--arch", required=True, choices=ARCH_CHOICES, help="architecture")
    p.add_argument("--synth", required=True, help="synthetic clip directory")
    p.add_argument("--real", required=True, help="real clip directory")
    p.add_argument("--out", required=True, help="checkpoint path")
    p.add_argument("--config", help="JSON file with TrainConfig fields (both stages)")
    p.add_argument("--pre-epochs", type=int, help="pretraining epochs (default: config epochs)")
    p.add_argument("--epochs", type=int, help="finetuning epochs")
    p.add_argument("--seed", type=int, help="override seed")
    p.add_argument("--history", help="write both histories as JSON here")
    _add_split_flags(p)

    p = sub.add_parser("eval", help="RMSE x100 and FID of a checkpoint on a clip directory")
    p.add_argument("--ckpt", required=True, help="checkpoint path")
    p.add_argument("--data", required=True, help="clip directory or JSONL file")
    p.add_argument("--json", required=True, help="report path ('-' for stdout)")
    p.add_argument("--subset", choices=["test", "all"], default="test",
                   help="evaluate the held-out split recorded at training time, or every window")
    p.add_argument("--seed", type=int, help="override the split seed")

    p = sub.add_parser("bench", help="batch-1 latency and parameter table")
    src = p.add_mutually_exclusive_group()
    src.add_argument("--arch", choices=ARCH_CHOICES + ["all"], default="all", help="architecture (default all)")
    src.add_argument("--ckpt", help="benchmark a trained checkpoint instead")
    p.add_argument("--warmup", type=int, default=100, help="untimed warm-up iterations (default 100)")
    p.add_argument("--iters", type=int, default=1000, help="timed iterations (default 1000)")
    p.add_argument("--seed", type=int, default=0, help="input/weight seed (default 0)")
    p.add_argument("--json", help="also write the reports as JSON here")

    p = sub.add_parser("forecast", help="stream 30-frame forecasts over keypoint clips")
    p.add_argument("--ckpt", required=True, help="checkpoint path")
    p.add_argument("--in", dest="inp", required=True, help="keypoint JSONL")
    p.add_argument("--out", required=True, help="forecast JSONL ('-' for stdout)")

    p = sub.add_parser("envelope", help="keep-out boxes around the latest forecast of each clip")
    p.add_argument("--ckpt", required=True, help="checkpoint path")
    p.add_argument("--in", dest="inp", required=True, help="keypoint JSONL")
    p.add_argument("--margin", type=float, required=True, help="box inflation in source units")
    p.add_argument("--out", required=True, help="envelope JSONL ('-' for stdout)")
    return parser


@contextlib.contextmanager
def _open_out(path):
    if path == "-":
        yield sys.stdout
    else:
        with open(path, "w", encoding="utf-8") as fh:
            yield fh


def _load_config(args, arch):
    d = {}
    if getattr(args, "config", None):
        try:
            d = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise DataError(f"config {args.config}: {exc}") from None
    return TrainConfig.from_dict(d, arch=arch)


def _override(cfg: TrainConfig, **kw) -> TrainConfig:
    d = cfg.to_dict()
    d.update({k: v for k, v in kw.items() if v is not None})
    return TrainConfig(**d)


def _split_windows(clips, step, fraction, seed, by_clip):
    windows = dataset.windows_from_clips(clips, step=step)
    if not windows:
        raise DataError("no clip is long enough for a 90-frame window")
    return dataset.split(windows, fraction, seed=seed, by_clip=by_clip, warn=not by_clip and step == 1)


def _split_meta(args, seed):
    return {"split_seed": seed, "step": args.step, "train_fraction": args.train_fraction,
            "by_clip": bool(args.split_by_clip)}


def cmd_synth(args):
    if args.real_like:
        corpus = synthgen.generate_real_like(args.count or 437, seed=args.seed, length=args.length or 120)
    else:
        corpus = synthgen.generate_corpus(args.tier, seed=args.seed, length=args.length or 90, count=args.count)
    synthgen.write_corpus(corpus, args.out)
    log.info("wrote %d clips to %s", len(corpus), args.out)
    return EXIT_OK


def cmd_train(args):
    cfg = _override(_load_config(args, args.arch), epochs=args.epochs, lr=args.lr,
                    batch_size=args.batch_size, seed=args.seed)
    train_w, test_w = _split_windows(dataset.load_dir(args.data), args.step, args.train_fraction,
                                     cfg.seed, args.split_by_clip)
    model = build_model(args.arch, seed=cfg.seed)
    if cfg.checkpoint_every and not cfg.checkpoint_path:
        cfg = _override(cfg, checkpoint_path=args.out)
    hist = train(model, train_w, test_w, cfg)
    save_checkpoint(model, hist.optimizer, args.out, meta=_split_meta(args, cfg.seed))
    if args.history:
        Path(args.history).write_text(json.dumps({"train_loss": hist.train_loss,
                                                  "eval_rmse_x100": hist.eval_rmse_x100}), encoding="utf-8")
    return EXIT_OK


def cmd_pretrain_finetune(args):
    base = _override(_load_config(args, args.arch), seed=args.seed)
    cfg_pre = _override(base, epochs=args.pre_epochs)
    cfg_fine = _override(base, epochs=args.epochs)
    synth_w = dataset.windows_from_clips(dataset.load_dir(args.synth))
    real_train, real_test = _split_windows(dataset.load_dir(args.real), args.step, args.train_fraction,
                                           base.seed, args.split_by_clip)
    model, pre, fine = pretrain_finetune(args.arch, synth_w, real_train, real_test, cfg_pre, cfg_fine)
    save_checkpoint(model, fine.optimizer, args.out, meta=_split_meta(args, base.seed))
    if args.history:
        Path(args.history).write_text(json.dumps({
            "pretrain": {"train_loss": pre.train_loss, "eval_rmse_x100": pre.eval_rmse_x100},
            "finetune": {"train_loss": fine.train_loss, "eval_rmse_x100": fine.eval_rmse_x100},
        }), encoding="utf-8")
    return EXIT_OK


def cmd_eval(args):
    meta = read_checkpoint_header(args.ckpt).get("meta", {})
    model, _ = load_checkpoint(args.ckpt)
    clips = dataset.load_dir(args.data)
    step = meta.get("step", 1)
    if args.subset == "all":
        windows = dataset.windows_from_clips(clips, step=step)
    else:
        seed = args.seed if args.seed is not None else meta.get("split_seed", 0)
        _, windows = dataset.split(dataset.windows_from_clips(clips, step=step), meta.get("train_fraction", 0.8),
                                   seed=seed, by_clip=meta.get("by_clip", False))
    if len(windows) < 2:
        raise DataError(f"need at least 2 evaluation windows, have {len(windows)}")
    X, Y = dataset.stack_windows(windows)
    report = evaluate(predict(model, X), Y)
    with _open_out(args.json) as fh:
        fh.write(report.to_json() + "\n")
    print(f"rmse_x100 {report.rmse_x100:.4f}  fid {report.fid:.4f}  n {report.n}", file=sys.stderr)
    return EXIT_OK


def cmd_bench(args):
    if args.ckpt:
        models = [load_checkpoint(args.ckpt)[0]]
    else:
        kinds = list(ArchKind) if args.arch == "all" else [ArchKind.parse(args.arch)]
        models = [build_model(k, seed=args.seed) for k in kinds]
    reports = [measure_latency(m, warmup=args.warmup, iters=args.iters, seed=args.seed) for m in models]
    print(report_table(reports))
    if args.json:
        with _open_out(args.json) as fh:
            fh.write(report_json(reports) + "\n")
    return EXIT_OK


def _stream_forecasts(model, clip):
    """Yield ``(frame_number, world_forecast)`` once per frame after the first ``t_in``."""
    t_in = model.hyper["t_in"]
    if len(clip) < t_in:
        return
    norm, cents, scales = dataset.normalize_frames(clip.frames)
    starts = np.arange(len(clip) - t_in + 1)
    X = np.stack([norm[s:s + t_in] for s in starts]).astype(np.float32)
    preds = predict(model, X)
    for s, pred in zip(starts, preds):
        last = s + t_in - 1
        yield clip.first_frame + int(last), to_world(pred, cents[last], scales[last])


def _frames_json(arr):
    return np.round(arr.astype(np.float64), 6).tolist()


def cmd_forecast(args):
    model, _ = load_checkpoint(args.ckpt)
    clips = dataset.load_clips(args.inp)
    with _open_out(args.out) as fh:
        for clip in clips:
            for frame, world in _stream_forecasts(model, clip):
                fh.write(json.dumps({"clip_id": clip.clip_id, "frame": frame,
                                     "forecast": _frames_json(world)}) + "\n")
    return EXIT_OK


def cmd_envelope(args):
    if args.margin < 0:
        raise ParameterError("--margin must be non-negative")
    model, _ = load_checkpoint(args.ckpt)
    clips = dataset.load_clips(args.inp)
    with _open_out(args.out) as fh:
        for clip in clips:
            latest = None
            for latest in _stream_forecasts(model, clip):
                pass
            if latest is None:
                log.warning("clip %s shorter than %d frames; no envelope", clip.clip_id, model.hyper["t_in"])
                continue
            frame, world = latest
            boxes, union = keepout_boxes(world, args.margin)
            for box in boxes:
                fh.write(json.dumps({"clip_id": clip.clip_id, "observed_frame": frame, **box.to_dict()}) + "\n")
            u = union.to_dict()
            fh.write(json.dumps({"clip_id": clip.clip_id, "observed_frame": frame,
                                 "union": {"min": u["min"], "max": u["max"]}}) + "\n")
    return EXIT_OK


COMMANDS = {
    "synth": cmd_synth,
    "train": cmd_train,
    "pretrain-finetune": cmd_pretrain_finetune,
    "eval": cmd_eval,
    "bench": cmd_bench,
    "forecast": cmd_forecast,
    "envelope": cmd_envelope,
}


def _fail(code, message):
    print(f"error[{code}]: {message}", file=sys.stderr)
    return code


def _show_warning(message, category, filename, lineno, file=None, line=None):
    print(f"warning: {message}", file=sys.stderr)


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        return _fail(EXIT_USAGE, exc)
    except SystemExit as exc:          # --help
        return int(exc.code or 0)
    if args.command is None:
        parser.print_help(sys.stderr)
        return _fail(EXIT_USAGE, "no command given")
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        with warnings.catch_warnings():
            warnings.showwarning = _show_warning
            return COMMANDS[args.command](args)
    except (TrainingDiverged, NumericError) as exc:
        return _fail(EXIT_NUMERIC, exc)
    except (DataError, CheckpointFormatError, DimensionError, OSError) as exc:
        return _fail(EXIT_DATA, exc)
    except (ParameterError, UsageError) as exc:
        return _fail(EXIT_USAGE, exc)
    except KPForecastError as exc:
        return _fail(EXIT_DATA, exc)


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
