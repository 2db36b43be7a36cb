"""Two-color-space underwater image enhancement.

A pixel-level RGB refinement block, a global HSV adjustment block driven by
learned piecewise linear curves, and a pixel-wise attention fusion of the
two candidates, together with the composite training objective and the
usual full-/no-reference underwater image quality metrics.
"""

from .colorspace import hsv_to_rgb, rgb_to_hsv
from .curves import CurveSet, apply_curves, eval_curve, identity_knots
from .data import DegradeParams, PairedSample, degrade, degrade_preset, load_pairs, train_transform
from .harness import RunManifest, TrainConfig, enhance, parse_config_file, run_ablation, train
from .losses import LossBreakdown, LossWeights, hsv_loss, l1_loss, perceptual_loss, ssim_loss, total_loss
from .metrics import MetricReport, UiqmWeights, evaluate_dir, mse_psnr, ssim_index, uciqe, uiqm
from .network import AttentionBlock, EnhancementNet, HsvGlobalBlock, ModelConfig, ModelOutput, RgbPixelBlock

__all__ = [
    "rgb_to_hsv",
    "hsv_to_rgb",
    "CurveSet",
    "eval_curve",
    "apply_curves",
    "identity_knots",
    "PairedSample",
    "DegradeParams",
    "load_pairs",
    "train_transform",
    "degrade",
    "degrade_preset",
    "TrainConfig",
    "RunManifest",
    "train",
    "enhance",
    "run_ablation",
    "parse_config_file",
    "LossWeights",
    "LossBreakdown",
    "l1_loss",
    "ssim_loss",
    "hsv_loss",
    "perceptual_loss",
    "total_loss",
    "MetricReport",
    "UiqmWeights",
    "mse_psnr",
    "ssim_index",
    "uciqe",
    "uiqm",
    "evaluate_dir",
    "EnhancementNet",
    "ModelConfig",
    "ModelOutput",
    "RgbPixelBlock",
    "HsvGlobalBlock",
    "AttentionBlock",
]

__version__ = "0.1.0"
