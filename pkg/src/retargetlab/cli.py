"""Command-line entry point.

Subcommands: gen-data, train, eval, baseline, retarget, gradcheck, render.
Exit codes: 0 success, 1 domain error (bad data/config), 2 usage error.
Diagnostics go to stderr; results go to files or stdout.
"""
from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import __version__
from .autodiff import Tape, Tensor, backward, gradcheck, tensor_sum
from .clipio import read_clip, read_dataset, write_clip, write_dataset
from .datagen import default_skeleton, generate_character_family, synthesize_dataset
from .errors import RetargetLabError
from .evaluation import (
    dataset_fingerprint,
    direction_copy,
    evaluate_all,
    format_report,
    position_copy,
    render_comparison,
    render_frame,
    write_report,
)
from .models import load_checkpoint, retarget_motion
from .training import TrainConfig, config_from_mapping, parse_config_text, train_loop

EXIT_OK = 0
EXIT_DOMAIN = 1
EXIT_USAGE = 2


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="retargetlab",
        description="Motion retargeting lab: synthetic data, adversarial training, "
        "baselines, evaluation, and rendering.",
    )
    parser.add_argument("--version", action="version", version=f"retargetlab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="synthesize a character family and dataset")
    p.add_argument("--chars", type=int, default=8, help="total characters in the family")
    p.add_argument("--train-chars", type=int, default=6)
    p.add_argument("--clips", type=int, default=20, help="training clips per character")
    p.add_argument("--test-motions", type=int, default=12)
    p.add_argument("--mode", choices=["exact", "flexibility"], default="exact")
    p.add_argument("--joints", type=int, default=8)
    p.add_argument("--frames", type=int, default=32, help="frames per generated clip")
    p.add_argument("--scale-min", type=float, default=0.7)
    p.add_argument("--scale-max", type=float, default=1.3)
    p.add_argument("--flex-min", type=float, default=0.4, help="flexibility mode lower bound")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True, help="dataset directory to create")

    p = sub.add_parser("train", help="train the encoder/decoder adversarially")
    p.add_argument("--config", help="key = value config file; flags override")
    p.add_argument("--dataset", help="dataset directory")
    p.add_argument("--out", help="run directory for trace/checkpoints")
    p.add_argument("--mode", choices=["cyclegan", "unit"])
    p.add_argument("--steps", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--learning-rate", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--checkpoint-every", type=int)
    p.add_argument("--clip-len", type=int)
    p.add_argument("--latent-dim", type=int)
    p.add_argument("--channels", help="comma-separated 3 widths, e.g. 16,32,64")
    p.add_argument("--variant", choices=["upsample", "transposed"])
    p.add_argument("--resume", help="checkpoint to resume from")

    p = sub.add_parser("eval", help="evaluate a checkpoint against both baselines")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", help="directory for report files (default: print)")

    p = sub.add_parser("baseline", help="evaluate the analytic baselines only")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", help="directory for report files (default: print)")

    p = sub.add_parser("retarget", help="retarget one clip file")
    p.add_argument("--in", dest="clip_in", required=True)
    p.add_argument("--lengths", required=True, help="text file of N-1 target bone lengths")
    p.add_argument(
        "--method", choices=["model", "position_copy", "direction_copy"], required=True
    )
    p.add_argument("--ckpt", help="checkpoint (required for --method model)")
    p.add_argument("--out", required=True)

    p = sub.add_parser("gradcheck", help="finite-difference check of every layer and loss")
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--tolerance", type=float, default=1e-5)

    p = sub.add_parser("render", help="render one frame (optionally a comparison) to SVG")
    p.add_argument("--in", dest="clip_in", required=True)
    p.add_argument("--frame", type=int, required=True)
    p.add_argument("--plane", choices=["xy", "xz", "yz"], default="xy")
    p.add_argument("--pred", help="prediction clip for a side-by-side panel")
    p.add_argument("--truth", help="ground-truth clip for a side-by-side panel")
    p.add_argument("--out", required=True)
    return parser


def _cmd_gen_data(args) -> int:
    test_chars = args.chars - args.train_chars
    if test_chars < 0:
        raise RetargetLabError("--train-chars exceeds --chars")
    canonical = default_skeleton(args.joints)
    flex_range = (args.flex_min, 1.0) if args.mode == "flexibility" else (1.0, 1.0)
    family = generate_character_family(
        canonical, args.chars, (args.scale_min, args.scale_max), args.seed,
        flexibility_range=flex_range,
    )
    dataset = synthesize_dataset(
        family, args.train_chars, test_chars, args.clips, args.test_motions,
        args.mode, args.frames, args.seed,
    )
    write_dataset(args.out, dataset)
    print(
        f"wrote {len(dataset.clips)} clips for {len(dataset.characters)} characters "
        f"to {args.out}",
        file=sys.stderr,
    )
    return EXIT_OK


def _cmd_train(args) -> int:
    mapping = {}
    if args.config:
        with open(args.config) as fh:
            mapping = parse_config_text(fh.read(), args.config)
    overrides = {
        "dataset": args.dataset,
        "out": args.out,
        "mode": args.mode,
        "steps": args.steps,
        "batch_size": args.batch_size,
        "learning_rate": args.learning_rate,
        "seed": args.seed,
        "checkpoint_every": args.checkpoint_every,
        "clip_len": args.clip_len,
        "latent_dim": args.latent_dim,
        "channels": args.channels,
        "variant": args.variant,
    }
    for key, value in overrides.items():
        if value is not None:
            mapping[key] = str(value)
    config = config_from_mapping(mapping)
    if config.dataset_path is None or config.out_dir is None:
        raise RetargetLabError("train needs --dataset and --out (or config values)")
    final = train_loop(config, resume_from=args.resume)
    print(f"final checkpoint: {final}", file=sys.stderr)
    return EXIT_OK


def _report_out(report, out_dir) -> None:
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        write_report(
            os.path.join(out_dir, "report.txt"),
            os.path.join(out_dir, "report.kv"),
            report,
        )
        print(f"wrote report to {out_dir}", file=sys.stderr)
    else:
        sys.stdout.write(format_report(report))


def _cmd_eval(args) -> int:
    params, meta, _ = load_checkpoint(args.ckpt)
    dataset = read_dataset(args.dataset)
    metadata = {
        "dataset": dataset_fingerprint(os.path.join(args.dataset, "manifest.txt")),
        "checkpoint": os.path.basename(args.ckpt),
        "mode": meta.get("mode", ""),
        "step": str(meta.get("step", "")),
    }
    report = evaluate_all(params, dataset, metadata)
    _report_out(report, args.out)
    return EXIT_OK


def _cmd_baseline(args) -> int:
    from .evaluation import EvalReport, MethodRow, retargeting_error

    dataset = read_dataset(args.dataset)
    rows = [
        MethodRow("Position copy", 0.0, 0.0, retargeting_error("position_copy", dataset)),
        MethodRow("Rotation copy", 0.0, 0.0, retargeting_error("direction_copy", dataset)),
    ]
    metadata = {"dataset": dataset_fingerprint(os.path.join(args.dataset, "manifest.txt"))}
    _report_out(EvalReport(rows, metadata), args.out)
    return EXIT_OK


def _cmd_retarget(args) -> int:
    clip = read_clip(args.clip_in)
    with open(args.lengths) as fh:
        lengths = np.array([float(tok) for tok in fh.read().split()])
    if args.method == "position_copy":
        result = position_copy(clip.motion)
    elif args.method == "direction_copy":
        result = direction_copy(clip.motion, lengths, clip.parents)
    else:
        if not args.ckpt:
            raise RetargetLabError("--method model requires --ckpt")
        params, _, _ = load_checkpoint(args.ckpt)
        result = retarget_motion(clip.motion, lengths, params)
    write_clip(args.out, clip.joint_names, clip.parents, lengths, result)
    print(f"wrote {args.out}", file=sys.stderr)
    return EXIT_OK


def _cmd_gradcheck(args) -> int:
    from .gradcheck_suite import run_gradcheck_suite

    results = run_gradcheck_suite(args.seed)
    worst = 0.0
    for name, err in results:
        status = "ok" if err <= args.tolerance else "FAIL"
        print(f"{name:<40s} {err:.3e}  {status}")
        worst = max(worst, err)
    print(f"{'max':<40s} {worst:.3e}")
    return EXIT_OK if worst <= args.tolerance else EXIT_DOMAIN


def _cmd_render(args) -> int:
    clip = read_clip(args.clip_in)
    if (args.pred is None) != (args.truth is None):
        raise RetargetLabError("--pred and --truth must be given together")
    if args.pred:
        pred = read_clip(args.pred)
        truth = read_clip(args.truth)
        render_comparison(
            [("source", clip.motion), ("prediction", pred.motion), ("ground truth", truth.motion)],
            clip.parents,
            args.frame,
            args.out,
            args.plane,
        )
    else:
        render_frame(clip.motion, clip.parents, args.frame, args.out, args.plane)
    print(f"wrote {args.out}", file=sys.stderr)
    return EXIT_OK


_COMMANDS = {
    "gen-data": _cmd_gen_data,
    "train": _cmd_train,
    "eval": _cmd_eval,
    "baseline": _cmd_baseline,
    "retarget": _cmd_retarget,
    "gradcheck": _cmd_gradcheck,
    "render": _cmd_render,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else EXIT_OK
    try:
        return _COMMANDS[args.command](args)
    except RetargetLabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
