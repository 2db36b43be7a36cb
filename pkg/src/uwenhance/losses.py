"""Training objective: L1, windowed SSIM, conical-HSV and perceptual terms.

The L1 and SSIM terms are evaluated at two sites, the pixel-refinement
output and the whole-network output, blended by a pair of lambda weights
that switch once at a schedule epoch. The HSV and perceptual terms apply to
the whole-network output only.

All loss functions take NCHW float tensors (a single 3xHxW image is also
accepted) and reduce with a mean, so the weights stay independent of batch
size and resolution.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable, Optional

import torch
import torch.nn.functional as F
from torch import Tensor

from .colorspace import rgb_to_hsv

SSIM_WINDOW = 11
SSIM_C1 = 0.02
SSIM_C2 = 0.03
LUMA_WEIGHTS = (0.299, 0.587, 0.114)

FeatureExtractor = Callable[[Tensor], Tensor]


@dataclass
class LossWeights:
    """Scalar weights of the four loss terms plus the lambda schedule.

    ``lambda_pixel``/``lambda_whole`` blend the two L1+SSIM evaluation sites
    during the first ``schedule_epoch`` epochs; afterwards the late pair
    takes over (0.1/0.9 by default), shifting supervision to the final
    output.
    """

    w_l1: float = 1.0
    w_ssim: float = 1.0
    w_hsv: float = 1.0
    w_perc: float = 0.5
    lambda_pixel: float = 0.5
    lambda_whole: float = 0.5
    lambda_pixel_late: float = 0.1
    lambda_whole_late: float = 0.9
    schedule_epoch: int = 20

    def lambdas(self, epoch: int) -> tuple[float, float]:
        if epoch < self.schedule_epoch:
            return self.lambda_pixel, self.lambda_whole
        return self.lambda_pixel_late, self.lambda_whole_late

    def combine(
        self,
        epoch: int,
        l1_pixel,
        ssim_pixel,
        l1_whole,
        ssim_whole,
        hsv,
        perceptual,
    ):
        """Blend the six component values into the total objective."""
        lam_p, lam_w = self.lambdas(epoch)
        return (
            lam_p * (self.w_l1 * l1_pixel + self.w_ssim * ssim_pixel)
            + lam_w * (self.w_l1 * l1_whole + self.w_ssim * ssim_whole)
            + self.w_hsv * hsv
            + self.w_perc * perceptual
        )


@dataclass
class LossBreakdown:
    """Total objective plus its components, kept as 0-d tensors in-graph."""

    total: Tensor
    l1_pixel: Tensor
    l1_whole: Tensor
    ssim_pixel: Tensor
    ssim_whole: Tensor
    hsv: Tensor
    perceptual: Tensor

    def as_floats(self) -> dict[str, float]:
        return {
            name: float(getattr(self, name).detach())
            for name in ("total", "l1_pixel", "l1_whole", "ssim_pixel", "ssim_whole", "hsv", "perceptual")
        }


def _as_batch(img: Tensor, name: str) -> Tensor:
    if img.ndim == 3:
        img = img.unsqueeze(0)
    if img.ndim != 4 or img.shape[1] != 3:
        raise ValueError(f"{name} must be an NCHW tensor with 3 channels, got shape {tuple(img.shape)}")
    return img


def _check_pair(pred: Tensor, gt: Tensor) -> tuple[Tensor, Tensor]:
    pred = _as_batch(pred, "pred")
    gt = _as_batch(gt, "gt")
    if pred.shape != gt.shape:
        raise ValueError(f"shape mismatch: pred {tuple(pred.shape)} vs gt {tuple(gt.shape)}")
    return pred, gt


def l1_loss(pred: Tensor, gt: Tensor) -> Tensor:
    """Mean absolute difference over all pixels and channels."""
    pred, gt = _check_pair(pred, gt)
    return (pred - gt).abs().mean()


def grayscale(img: Tensor) -> Tensor:
    """Luma projection of an NCHW image to N1HW."""
    wr, wg, wb = LUMA_WEIGHTS
    return (wr * img[:, 0] + wg * img[:, 1] + wb * img[:, 2]).unsqueeze(1)


def ssim_map(pred_gray: Tensor, gt_gray: Tensor, window: int = SSIM_WINDOW) -> Tensor:
    """Per-pixel SSIM over uniform window x window patches (valid placement only)."""
    if pred_gray.shape[-2] < window or pred_gray.shape[-1] < window:
        raise ValueError(f"images smaller than the {window}x{window} SSIM window: {tuple(pred_gray.shape[-2:])}")
    mean = lambda t: F.avg_pool2d(t, window, stride=1)
    mu_p = mean(pred_gray)
    mu_g = mean(gt_gray)
    var_p = mean(pred_gray * pred_gray) - mu_p * mu_p
    var_g = mean(gt_gray * gt_gray) - mu_g * mu_g
    cov = mean(pred_gray * gt_gray) - mu_p * mu_g
    lum = (2 * mu_p * mu_g + SSIM_C1) / (mu_p * mu_p + mu_g * mu_g + SSIM_C1)
    struct = (2 * cov + SSIM_C2) / (var_p + var_g + SSIM_C2)
    return lum * struct


def ssim_mean(pred: Tensor, gt: Tensor) -> Tensor:
    """Mean SSIM between the luma planes of two RGB images."""
    pred, gt = _check_pair(pred, gt)
    return ssim_map(grayscale(pred), grayscale(gt)).mean()


def ssim_loss(pred: Tensor, gt: Tensor) -> Tensor:
    """1 - mean SSIM; in [0, 2] since SSIM lies in [-1, 1]."""
    return 1.0 - ssim_mean(pred, gt)


def hsv_loss(pred: Tensor, gt: Tensor) -> Tensor:
    """Mean L1 distance between conical-HSV projections S*V*cos(H).

    Both images pass through the differentiable RGB->HSV conversion; the
    stored [0, 1) hue is rescaled to radians before the cosine.
    """
    pred, gt = _check_pair(pred, gt)

    def conical(img: Tensor) -> Tensor:
        h, s, v = rgb_to_hsv(img.movedim(1, -1)).unbind(-1)
        return s * v * torch.cos(h * (2.0 * torch.pi))

    return (conical(pred) - conical(gt)).abs().mean()


def perceptual_loss(pred: Tensor, gt: Tensor, extractor: Optional[FeatureExtractor]) -> Tensor:
    """Squared feature distance normalized by the feature map size.

    With no extractor available the term contributes 0 so training can
    proceed in a degraded mode.
    """
    pred, gt = _check_pair(pred, gt)
    if extractor is None:
        warnings.warn("no feature extractor available; perceptual loss contributes 0", RuntimeWarning)
        return pred.new_zeros(())
    feat_pred = extractor(pred)
    feat_gt = extractor(gt)
    return ((feat_pred - feat_gt) ** 2).mean()


def total_loss(
    pixel_out: Tensor,
    final_out: Tensor,
    gt: Tensor,
    weights: LossWeights,
    epoch: int,
    extractor: Optional[FeatureExtractor] = None,
) -> LossBreakdown:
    """Full objective: L1+SSIM at both evaluation sites, HSV and perceptual on the final output."""
    parts = dict(
        l1_pixel=l1_loss(pixel_out, gt),
        ssim_pixel=ssim_loss(pixel_out, gt),
        l1_whole=l1_loss(final_out, gt),
        ssim_whole=ssim_loss(final_out, gt),
        hsv=hsv_loss(final_out, gt),
        perceptual=perceptual_loss(final_out, gt, extractor),
    )
    total = weights.combine(epoch, **{k: parts[k] for k in
                                      ("l1_pixel", "ssim_pixel", "l1_whole", "ssim_whole", "hsv", "perceptual")})
    return LossBreakdown(total=total, **parts)
