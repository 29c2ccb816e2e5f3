"""Command line: train on a pair manifest, or denoise a WAV directory."""

from __future__ import annotations

import argparse
import logging
import sys

from .config import TrainConfig
from .infer import denoise_batch
from .train import train


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="reef-denoiser")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train on a synthesis manifest")
    p.add_argument("--pairs", required=True, help="pair manifest CSV")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--epochs", type=int, default=None,
                   help="override the config epoch ceiling")
    p.add_argument("--channels", type=int, default=None)
    p.add_argument("--repeats", type=int, default=None)
    p.add_argument("--batch-size", type=int, default=None)
    p.add_argument("--learning-rate", type=float, default=None)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("denoise", help="denoise a directory of WAV files")
    p.add_argument("--model", required=True, help="checkpoint path")
    p.add_argument("--in-dir", required=True)
    p.add_argument("--out-dir", required=True)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    if args.command == "train":
        overrides = {
            k: v
            for k, v in (
                ("channels", args.channels),
                ("repeats", args.repeats),
                ("batch_size", args.batch_size),
                ("learning_rate", args.learning_rate),
            )
            if v is not None
        }
        cfg = TrainConfig(seed=args.seed, **overrides)
        best = train(args.pairs, cfg, args.out_dir, epochs=args.epochs)
        print(f"best epoch {best.epoch}: val MAE {best.val_loss:.6f} -> {best.path}")
        return 0
    written = denoise_batch(args.model, args.in_dir, args.out_dir)
    print(f"denoised {len(written)} files")
    return 0


if __name__ == "__main__":
    sys.exit(main())
