"""Command-line pipeline: synthesize assets, compose a dataset, distort
backgrounds, train, evaluate, and report."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import harness
from .errors import BgmatteError
from .metrics import EVAL_ALL, EVAL_UNKNOWN
from .netdisc import DiscriminatorConfig
from .netgen import GeneratorConfig
from .trainer import TrainConfig, train


def _add_synth_data(sub: argparse._SubParsersAction) -> None:
    p = sub.add_parser("synth-data", help="synthesize foreground/background asset pools")
    p.add_argument("--out", required=True, help="output directory for assets.json and images")
    p.add_argument("--n-fg", type=int, default=4)
    p.add_argument("--n-bg", type=int, default=4)
    p.add_argument("--height", type=int, default=96)
    p.add_argument("--width", type=int, default=96)
    p.add_argument("--seed", type=int, default=0)


def _add_compose(sub: argparse._SubParsersAction) -> None:
    p = sub.add_parser("compose", help="pair foregrounds with backgrounds into a dataset")
    p.add_argument("--assets", required=True, help="assets.json from synth-data")
    p.add_argument("--out", required=True, help="output dataset directory")
    p.add_argument("--per-fg", type=int, default=2, help="composites per foreground")
    p.add_argument("--band-radius", type=int, default=3, help="trimap unknown-band radius")
    p.add_argument("--train-frac", type=float, default=0.8)
    p.add_argument("--seed", type=int, default=0)


def _add_distort(sub: argparse._SubParsersAction) -> None:
    p = sub.add_parser("distort", help="render distorted background variants into a dataset")
    p.add_argument("--manifest", required=True)
    p.add_argument("--mode", choices=[harness.MODE_M, harness.MODE_H], required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--m-fraction", type=float, default=0.5, help="fraction distorted in mode M")


_TRAIN_DEFAULTS = {
    "mode": harness.MODE_CLEAN,
    "epochs": 1,
    "batch_size": 2,
    "crop_size": 64,
    "lr": 2e-4,
    "seed": 0,
    "checkpoint_every": 0,
    "g_width": 8,
    "d_width": 16,
    "d_layers": 1,
}


def _add_train(sub: argparse._SubParsersAction) -> None:
    p = sub.add_parser("train", help="train the generator/discriminator pair")
    p.add_argument("--data", "--manifest", dest="manifest", required=True, help="dataset manifest JSON")
    p.add_argument("--out", required=True, help="run directory for checkpoints and losses.csv")
    p.add_argument("--config", default=None, help="JSON key-value file; flags override its entries")
    p.add_argument(
        "--mode",
        choices=[harness.MODE_CLEAN, harness.MODE_M, harness.MODE_H],
        default=None,
        help="which background variant feeds the networks",
    )
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--batch-size", type=int, default=None)
    p.add_argument("--crop-size", type=int, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--checkpoint-every", type=int, default=None, help="steps between snapshots (0: final only)")
    p.add_argument("--g-width", type=int, default=None, help="generator base channel width")
    p.add_argument("--d-width", type=int, default=None, help="discriminator base channel width")
    p.add_argument("--d-layers", type=int, default=None, help="discriminator depth")
    p.add_argument("--resume", default=None, help="train-state checkpoint to continue from")


def _add_evaluate_still(sub: argparse._SubParsersAction) -> None:
    p = sub.add_parser("evaluate-still", help="score a predictor on a dataset split")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True, help="output results JSON")
    p.add_argument(
        "--mode",
        choices=[harness.MODE_CLEAN, harness.MODE_M, harness.MODE_H],
        default=harness.MODE_CLEAN,
    )
    p.add_argument("--split", choices=[harness.SPLIT_TRAIN, harness.SPLIT_EVAL, "all"], default=harness.SPLIT_EVAL)
    p.add_argument("--region", choices=[EVAL_UNKNOWN, EVAL_ALL], default=EVAL_UNKNOWN)
    p.add_argument("--predictor", choices=["checkpoint", "oracle"], default="checkpoint")
    p.add_argument("--ckpt", default=None, help="generator or train-state checkpoint")
    p.add_argument("--method", default=None, help="row label in reports")
    p.add_argument("--csv", default=None, help="optional per-image CSV (with a final mean row)")


def _add_evaluate_video(sub: argparse._SubParsersAction) -> None:
    p = sub.add_parser("evaluate-video", help="score a predictor over video frame sequences")
    p.add_argument("--spec", required=True, help="video eval spec JSON")
    p.add_argument("--out", required=True, help="output results JSON")
    p.add_argument("--region", choices=[EVAL_UNKNOWN, EVAL_ALL], default=EVAL_UNKNOWN)
    p.add_argument("--predictor", choices=["checkpoint", "oracle"], default="checkpoint")
    p.add_argument("--ckpt", default=None)
    p.add_argument("--method", default=None)


def _add_report(sub: argparse._SubParsersAction) -> None:
    p = sub.add_parser("report", help="tabulate evaluation results")
    p.add_argument("--results", nargs="+", required=True, help="evaluation result JSON files")
    p.add_argument("--out", default=None, help="optional CSV path")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bgmatte", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    _add_synth_data(sub)
    _add_compose(sub)
    _add_distort(sub)
    _add_train(sub)
    _add_evaluate_still(sub)
    _add_evaluate_video(sub)
    _add_report(sub)
    return parser


def _make_predictor(args: argparse.Namespace):
    if args.predictor == "oracle":
        return harness.oracle_predictor, "oracle"
    if args.ckpt is None:
        raise BgmatteError("--ckpt is required with --predictor checkpoint")
    return harness.checkpoint_predictor(args.ckpt), f"ckpt:{Path(args.ckpt).stem}"


def _run(args: argparse.Namespace) -> int:
    if args.command == "synth-data":
        path = harness.build_asset_pool(
            args.out, args.n_fg, args.n_bg, (args.height, args.width), args.seed
        )
        print(f"wrote {path}")
    elif args.command == "compose":
        path = harness.compose_dataset(
            args.assets, args.out, args.per_fg, args.band_radius, args.train_frac, args.seed
        )
        print(f"wrote {path}")
    elif args.command == "distort":
        harness.add_distorted_backgrounds(args.manifest, args.mode, args.seed, args.m_fraction)
        print(f"updated {args.manifest} with mode-{args.mode} backgrounds")
    elif args.command == "train":
        opts = dict(_TRAIN_DEFAULTS)
        if args.config:
            file_cfg = harness.read_json(args.config)
            unknown = set(file_cfg) - set(_TRAIN_DEFAULTS)
            if unknown:
                raise BgmatteError(f"unknown config keys: {sorted(unknown)}")
            opts.update(file_cfg)
        for key in _TRAIN_DEFAULTS:
            flag = getattr(args, key)
            if flag is not None:
                opts[key] = flag
        dataset = harness.load_training_set(args.manifest, opts["mode"], harness.SPLIT_TRAIN)
        cfg = TrainConfig(
            learning_rate=opts["lr"],
            epochs=opts["epochs"],
            batch_size=opts["batch_size"],
            crop_size=opts["crop_size"],
            seed=opts["seed"],
            checkpoint_every=opts["checkpoint_every"],
        )
        state = train(
            cfg,
            dataset,
            args.out,
            g_cfg=GeneratorConfig(base_width=opts["g_width"]),
            d_cfg=DiscriminatorConfig(base_width=opts["d_width"], n_layers=opts["d_layers"]),
            resume_from=args.resume,
        )
        print(f"trained {state.step} steps; outputs in {args.out}")
    elif args.command == "evaluate-still":
        predictor, default_method = _make_predictor(args)
        split = None if args.split == "all" else args.split
        results = harness.evaluate_still(
            predictor,
            args.manifest,
            mode=args.mode,
            split=split,
            eval_region=args.region,
            method=args.method or default_method,
        )
        harness.write_results(args.out, results)
        if args.csv:
            harness.write_sample_csv(results, args.csv)
        mean = results["mean"]
        print(
            f"{results['method']}: sad={mean['sad']:.3f} mse={mean['mse']:.5f} "
            f"grad={mean['grad']:.3f} conn={mean['conn']:.3f} "
            f"({results['n_evaluated']} evaluated, {results['n_failed']} failed)"
        )
    elif args.command == "evaluate-video":
        predictor, default_method = _make_predictor(args)
        results = harness.evaluate_video(
            predictor, args.spec, eval_region=args.region, method=args.method or default_method
        )
        harness.write_results(args.out, results)
        n_partial = sum(1 for s in results["sequences"] if s["partial"])
        print(f"{results['method']}: {len(results['sequences'])} sequences, {n_partial} partial")
    elif args.command == "report":
        print(harness.report(args.results, args.out))
    else:
        raise BgmatteError(f"unknown command {args.command!r}")
    return 0


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _run(args)
    except BgmatteError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
