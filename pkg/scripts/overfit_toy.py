#!/usr/bin/env python3
"""Desk-scale sanity experiment: overfit a self-degraded toy set.

Builds n synthetic clean images, degrades them with the underwater presets,
trains for a capped number of steps with the stock optimizer settings, and
reports train-set metrics. Mirrors acceptance criterion 5.

    python scripts/overfit_toy.py --out runs/overfit --steps 200
"""

import argparse
import time
from pathlib import Path

from uwenhance import data, harness


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", type=Path, default=Path("runs/overfit_toy"))
    parser.add_argument("--steps", type=int, default=200)
    parser.add_argument("--pairs", type=int, default=8)
    parser.add_argument("--size", type=int, default=72)
    parser.add_argument("--crop", type=int, default=64)
    parser.add_argument("--width", type=int, default=64)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--variant", default="full", choices=("full", "rgb_only", "no_attention"))
    args = parser.parse_args()

    toy_root = args.out / "dataset"
    ids = data.build_toy_dataset(toy_root, n_pairs=args.pairs, size=args.size, seed=args.seed)
    print(f"built {len(ids)} degraded pairs under {toy_root}")

    cfg = harness.TrainConfig(
        epochs=args.steps,
        max_steps=args.steps,
        batch_size=8,
        lr=1e-4,
        seed=args.seed,
        hidden_channels=args.width,
        resize_to=args.size,
        crop_to=args.crop,
        checkpoint_every=max(1, args.steps // 2),
        perceptual_extractor="random",
        variant=args.variant,
    )
    t0 = time.time()
    manifest = harness.train(cfg, toy_root, args.out / "run")
    print(f"trained {args.steps} steps in {time.time() - t0:.0f}s ({manifest.n_parameters:,} parameters)")

    model = harness.model_from_checkpoint(harness.load_checkpoint(manifest.final_checkpoint))
    report = harness.evaluate_model(model, toy_root)
    report.to_csv(args.out / "train_set_metrics.csv")
    agg = report.aggregate
    print(f"train-set  MSE {agg.mse:8.2f}  PSNR {agg.psnr_db:6.2f} dB  SSIM {agg.ssim:.4f}")
    print(f"           UCIQE {agg.uciqe:.4f}  UIQM {agg.uiqm:.4f}")
    print(f"report: {args.out / 'train_set_metrics.csv'}")


if __name__ == "__main__":
    main()
