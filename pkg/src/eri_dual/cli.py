"""Command-line entry point: synth, extract-mfcc, train, eval, gradcheck."""
from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

import numpy as np

from . import audio, data, gradcheck, synth, tnsr
from .checkpoint import CheckpointError, load_checkpoint, read_config, save_checkpoint
from .config import load_config
from .metrics import evaluate
from .report import write_bin_reports
from .train import MissingCheckpoint, predict, train_stage


def _parse_sets(items: list[str]) -> dict[str, str]:
    out = {}
    for item in items or []:
        if "=" not in item:
            raise SystemExit(f"--set expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def cmd_synth(args) -> int:
    spec = synth.SynthSpec(
        n_samples=args.n, seed=args.seed, noise=args.noise, frames=args.frames,
        image_size=args.image_size, audio_seconds=args.audio_seconds, sample_rate=args.sample_rate,
    )
    clips = synth.generate(spec)
    out = Path(args.out)
    data.write_dataset(out, clips)
    if args.val_frac > 0:
        train, val = synth.split(clips, 1.0 - args.val_frac, args.seed)
        data.write_manifest(out / "train.txt", train)
        data.write_manifest(out / "val.txt", val)
    print(f"wrote {len(clips)} clips to {out}")
    return 0


def cmd_extract_mfcc(args) -> int:
    w = audio.read_wav(args.wav)
    cfg = audio.MfccConfig(w.sample_rate, args.frame_len, args.hop, args.n_mels, args.fmin,
                           args.fmax if args.fmax is not None else w.sample_rate / 2)
    seq = audio.extract(w, cfg)
    tnsr.save(args.out, {
        "mfcc": seq.frames,
        "source_hop": np.array([seq.source_hop], dtype=np.float64),
        "source_sample_rate": np.array([seq.source_sample_rate], dtype=np.float64),
    })
    print(f"{seq.frames.shape[0]} x {seq.frames.shape[1]} -> {args.out}")
    return 0


def cmd_train(args) -> int:
    overrides = _parse_sets(args.set)
    overrides["stage"] = args.stage
    if args.profile:
        overrides["profile"] = args.profile
    if args.seed is not None:
        overrides["seed"] = str(args.seed)
    cfg = load_config(args.config, overrides)
    video_state = audio_state = None
    if cfg.stage == "fusion":
        if not args.video_ckpt or not args.audio_ckpt:
            print("error: fusion stage needs --video-ckpt and --audio-ckpt", file=sys.stderr)
            return 2
        video_state = tnsr.load(args.video_ckpt)
        audio_state = tnsr.load(args.audio_ckpt)
        for want, state in (("video", video_state), ("audio", audio_state)):
            got = read_config(state).stage
            if got != want:
                print(f"error: --{want}-ckpt holds a {got!r} stage checkpoint", file=sys.stderr)
                return 2
    train = data.prepare(data.read_manifest(args.train), cfg, cfg.stage)
    val = data.prepare(data.read_manifest(args.val), cfg, cfg.stage)
    try:
        result = train_stage(cfg, train, val, video_state, audio_state)
    except (MissingCheckpoint, CheckpointError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    save_checkpoint(result.model, cfg, args.out)
    if args.history:
        with open(args.history, "w", newline="") as f:
            w = csv.DictWriter(f, fieldnames=list(result.history[0]))
            w.writeheader()
            w.writerows(result.history)
    print(f"best val rho_bar {result.best_rho:.4f} at epoch {result.best_epoch}; saved {args.out}")
    return 0


def cmd_eval(args) -> int:
    try:
        model, cfg = load_checkpoint(args.checkpoint)
    except CheckpointError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    arrays = data.prepare(data.read_manifest(args.data), cfg, cfg.stage)
    preds = predict(model, cfg.stage, arrays, cfg.batch_size)
    text = evaluate(preds, arrays.labels).to_text()
    if args.out:
        Path(args.out).write_text(text)
    sys.stdout.write(text)
    if args.report_bins:
        for p in write_bin_reports(args.report_bins, arrays.labels, preds):
            print(f"wrote {p}")
    return 0


def cmd_gradcheck(args) -> int:
    results = gradcheck.run(args.seed, args.per_tensor)
    print(gradcheck.format_table(results))
    failed = [r.name for r in results if not r.passed]
    if failed:
        print(f"FAILED groups: {', '.join(failed)}")
        return 1
    print(f"all {len(results)} groups passed")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="eri-dual", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write a synthetic labelled dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--n", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--frames", type=int, default=32)
    p.add_argument("--image-size", type=int, default=56)
    p.add_argument("--audio-seconds", type=float, default=2.0)
    p.add_argument("--sample-rate", type=int, default=16000)
    p.add_argument("--val-frac", type=float, default=0.2)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("extract-mfcc", help="WAV -> stacked 1024-dim MFCC sequence (TNSR)")
    p.add_argument("wav")
    p.add_argument("out")
    p.add_argument("--frame-len", type=int, default=2048)
    p.add_argument("--hop", type=int, default=512)
    p.add_argument("--n-mels", type=int, default=128)
    p.add_argument("--fmin", type=float, default=0.0)
    p.add_argument("--fmax", type=float, default=None)
    p.set_defaults(func=cmd_extract_mfcc)

    p = sub.add_parser("train", help="train one stage")
    p.add_argument("--stage", choices=["video", "audio", "fusion"], required=True)
    p.add_argument("--train", required=True, help="training manifest")
    p.add_argument("--val", required=True, help="validation manifest")
    p.add_argument("--out", required=True, help="checkpoint path")
    p.add_argument("--config", help="key = value config file")
    p.add_argument("--profile", choices=["desk", "paper"])
    p.add_argument("--seed", type=int)
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="config override")
    p.add_argument("--video-ckpt")
    p.add_argument("--audio-ckpt")
    p.add_argument("--history", help="write per-epoch metrics CSV")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a manifest")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", help="write the report here as well")
    p.add_argument("--report-bins", metavar="DIR", help="write 10-level histogram/confusion CSVs")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("gradcheck", help="finite-difference check of a reduced model")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--per-tensor", type=int, default=4)
    p.set_defaults(func=cmd_gradcheck)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
