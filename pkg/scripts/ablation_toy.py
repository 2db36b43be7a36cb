#!/usr/bin/env python3
"""Ablation comparison on the toy set: full model vs rgb_only vs no_attention.

Trains each variant under identical settings and prints the metric table
(MSE / PSNR / SSIM / UCIQE / UIQM columns, one row per variant).

    python scripts/ablation_toy.py --out runs/ablation --steps 200
"""

import argparse
from pathlib import Path

from uwenhance import data, harness


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", type=Path, default=Path("runs/ablation_toy"))
    parser.add_argument("--steps", type=int, default=200)
    parser.add_argument("--pairs", type=int, default=8)
    parser.add_argument("--size", type=int, default=72)
    parser.add_argument("--width", type=int, default=64)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    toy_root = args.out / "dataset"
    data.build_toy_dataset(toy_root, n_pairs=args.pairs, size=args.size, seed=args.seed)

    cfg = harness.TrainConfig(
        epochs=args.steps,
        max_steps=args.steps,
        batch_size=8,
        lr=1e-4,
        seed=args.seed,
        hidden_channels=args.width,
        resize_to=args.size,
        crop_to=args.size - 8,
        checkpoint_every=max(1, args.steps),
        perceptual_extractor="random",
    )

    rows = []
    for variant in ("rgb_only", "no_attention", "full"):
        report = harness.run_ablation(cfg, variant, toy_root, toy_root, args.out / variant)
        agg = report.aggregate
        rows.append((variant, agg.mse, agg.psnr_db, agg.ssim, agg.uciqe, agg.uiqm))
        print(f"finished {variant}")

    print(f"\n{'variant':<14}{'MSE':>10}{'PSNR(dB)':>10}{'SSIM':>8}{'UCIQE':>8}{'UIQM':>8}")
    for variant, mse, psnr, ssim, uciqe, uiqm in rows:
        print(f"{variant:<14}{mse:>10.2f}{psnr:>10.2f}{ssim:>8.4f}{uciqe:>8.4f}{uiqm:>8.4f}")


if __name__ == "__main__":
    main()
