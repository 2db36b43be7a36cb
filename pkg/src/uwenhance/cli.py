"""Command line interface: train, enhance, evaluate, gradcheck, degrade."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import data as data_mod
from . import gradcheck as gradcheck_mod
from . import harness
from . import metrics as metrics_mod
from .imgio import list_images, load_image, save_image


def _cmd_train(args) -> int:
    cfg = harness.parse_config_file(args.config) if args.config else harness.TrainConfig()
    manifest = harness.train(cfg, args.data, args.out, resume_from=args.resume)
    print(f"run {manifest.status}; final checkpoint: {manifest.final_checkpoint}")
    print(f"manifest: {Path(args.out) / 'manifest.json'}")
    return 0 if manifest.status == "complete" else 1


def _cmd_enhance(args) -> int:
    written = harness.enhance(
        args.ckpt,
        getattr(args, "in"),
        args.out,
        dump_intermediates=args.dump_intermediates,
        dump_curves=args.dump_curves,
    )
    for path in written:
        print(f"wrote {path}")
    return 0


def _cmd_evaluate(args) -> int:
    report = metrics_mod.evaluate_dir(args.pred, args.gt)
    report.to_csv(args.report)
    if args.json:
        report.to_json(args.json)
    n_err = sum(1 for r in report.rows if r.error)
    print(f"scored {len(report.rows)} images ({n_err} errors); report: {args.report}")
    if report.aggregate is None:
        print("no valid rows; aggregate omitted")
    else:
        agg = report.aggregate
        cols = ", ".join(f"{c}={v:.4f}" for c, v in agg.values().items() if v is not None)
        print(f"aggregate: {cols}")
    return 0


def _cmd_gradcheck(args) -> int:
    results = gradcheck_mod.run_checks(args.module)
    ok = True
    for res in results:
        status = "PASS" if res.passed else "FAIL"
        print(f"[{status}] {res.name}: max rel err {res.max_rel_err:.3e} (tol {res.tolerance:.0e})")
        ok &= res.passed
    return 0 if ok else 1


def _cmd_degrade(args) -> int:
    if args.params:
        params = data_mod.degrade_params_from_file(args.params)
        label = args.params
    else:
        params = data_mod.degrade_preset(args.preset, seed=args.seed)
        label = args.preset
    in_dir, out_dir = Path(getattr(args, "in")), Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    count = 0
    for src in list_images(in_dir):
        per_image = params.with_seed(args.seed + count)
        save_image(out_dir / src.name, data_mod.degrade(load_image(src), per_image))
        count += 1
    print(f"degraded {count} images with {label!r} into {out_dir}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="uwenhance", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train a model on a paired dataset")
    p_train.add_argument("--config", help="flat key = value config file (defaults used when omitted)")
    p_train.add_argument("--data", required=True, help="dataset root containing raw/ and reference/")
    p_train.add_argument("--out", required=True, help="output directory for checkpoints, losses and manifest")
    p_train.add_argument("--resume", help="checkpoint to resume from")
    p_train.set_defaults(func=_cmd_train)

    p_enh = sub.add_parser("enhance", help="enhance an image or directory with a trained checkpoint")
    p_enh.add_argument("--ckpt", required=True)
    p_enh.add_argument("--in", required=True, help="input image or directory")
    p_enh.add_argument("--out", required=True, help="output image or directory")
    p_enh.add_argument("--dump-intermediates", action="store_true", help="also write branch outputs, attention maps and curve CSV")
    p_enh.add_argument("--dump-curves", action="store_true", help="write the regressed knot vectors as CSV")
    p_enh.set_defaults(func=_cmd_enhance)

    p_eval = sub.add_parser("evaluate", help="score a directory of images")
    p_eval.add_argument("--pred", required=True, help="directory of images to score")
    p_eval.add_argument("--gt", help="matching ground-truth directory for full-reference metrics")
    p_eval.add_argument("--report", required=True, help="CSV report path")
    p_eval.add_argument("--json", help="optional JSON report path")
    p_eval.set_defaults(func=_cmd_evaluate)

    p_grad = sub.add_parser("gradcheck", help="verify analytic gradients against finite differences")
    p_grad.add_argument("--module", choices=sorted(gradcheck_mod.CHECKS), help="check one module (default: all)")
    p_grad.set_defaults(func=_cmd_gradcheck)

    p_deg = sub.add_parser("degrade", help="synthesize degraded copies of clean images")
    group = p_deg.add_mutually_exclusive_group(required=True)
    group.add_argument("--preset", choices=sorted(data_mod.DEGRADE_PRESETS))
    group.add_argument("--params", help="flat key = value file with explicit degradation parameters")
    p_deg.add_argument("--in", required=True, help="directory of clean images")
    p_deg.add_argument("--out", required=True, help="output directory")
    p_deg.add_argument("--seed", type=int, default=0)
    p_deg.set_defaults(func=_cmd_degrade)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
