"""Full-reference (MSE/PSNR/SSIM) and no-reference underwater quality metrics.

MSE and PSNR are reported on the 8-bit 0-255 scale even though images are
stored in [0, 1], keeping report magnitudes comparable with the usual
benchmark tables. SSIM shares one implementation with the training loss.

The no-reference side follows the standard underwater measures: a color
index from chroma spread, luminance contrast and saturation in an opponent
(Lab) space, and a composite of colorfulness (trimmed opponent-plane
statistics), sharpness (edge-map EME over blocks) and contrast (logarithmic
AMEE over blocks).
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import torch

from . import losses
from .imgio import list_images, load_image

PSNR_CAP_DB = 100.0
MSE_CAP_THRESHOLD = 1e-10

UCIQE_COEFFS = (0.4680, 0.2745, 0.2576)
UCIQE_PERCENTILE = 0.01

UIQM_BLOCK = 8
UIQM_TRIM = 0.1
UISM_LUMA = (0.299, 0.587, 0.114)


@dataclass
class UiqmWeights:
    c1: float = 0.0282
    c2: float = 0.2953
    c3: float = 3.5753


@dataclass
class UiqmScores:
    uicm: float
    uism: float
    uiconm: float
    uiqm: float


def _check_image(img: np.ndarray, name: str = "image") -> np.ndarray:
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ValueError(f"{name} must be HxWx3, got shape {arr.shape}")
    return arr


def _check_pair(pred: np.ndarray, gt: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    pred = _check_image(pred, "pred")
    gt = _check_image(gt, "gt")
    if pred.shape != gt.shape:
        raise ValueError(f"shape mismatch: pred {pred.shape} vs gt {gt.shape}")
    return pred, gt


# ---------------------------------------------------------------------------
# full-reference metrics


def mse_psnr(pred: np.ndarray, gt: np.ndarray) -> tuple[float, float]:
    """(MSE, PSNR dB) on the 0-255 scale; PSNR capped at 100 dB for near-zero MSE."""
    pred, gt = _check_pair(pred, gt)
    mse = float(np.mean(((pred - gt) * 255.0) ** 2))
    if mse < MSE_CAP_THRESHOLD:
        return mse, PSNR_CAP_DB
    return mse, 10.0 * math.log10(255.0 ** 2 / mse)


def ssim_index(pred: np.ndarray, gt: np.ndarray) -> float:
    """Mean SSIM similarity; same windowed-luma definition as the training loss."""
    pred, gt = _check_pair(pred, gt)
    to_t = lambda a: torch.from_numpy(np.ascontiguousarray(a.transpose(2, 0, 1)))
    return float(losses.ssim_mean(to_t(pred), to_t(gt)))


# ---------------------------------------------------------------------------
# opponent-space color index


def _rgb_to_lab(rgb: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """sRGB in [0, 1] to CIE Lab planes (L in [0, 100], a/b roughly [-128, 128])."""
    linear = np.where(rgb <= 0.04045, rgb / 12.92, ((rgb + 0.055) / 1.055) ** 2.4)
    mat = np.array(
        [
            [0.4124564, 0.3575761, 0.1804375],
            [0.2126729, 0.7151522, 0.0721750],
            [0.0193339, 0.1191920, 0.9503041],
        ]
    )
    xyz = linear @ mat.T
    xyz /= np.array([0.95047, 1.0, 1.08883])
    eps = (6.0 / 29.0) ** 3
    f = np.where(xyz > eps, np.cbrt(xyz), xyz / (3.0 * (6.0 / 29.0) ** 2) + 4.0 / 29.0)
    fx, fy, fz = f[..., 0], f[..., 1], f[..., 2]
    return 116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)


def uciqe_components(img: np.ndarray) -> tuple[float, float, float]:
    """(chroma std, luminance percentile spread, mean saturation) on normalized Lab planes."""
    img = _check_image(img)
    lum, a, b = _rgb_to_lab(img)
    lum = lum / 100.0
    chroma = np.hypot(a, b) / 128.0

    sigma_c = float(np.std(chroma))

    flat = np.sort(lum, axis=None)
    k = max(1, int(round(UCIQE_PERCENTILE * flat.size)))
    con_l = float(np.mean(flat[-k:]) - np.mean(flat[:k]))

    norm = np.hypot(chroma, lum)
    sat = np.divide(chroma, norm, out=np.zeros_like(chroma), where=norm > 0)
    return sigma_c, con_l, float(np.mean(sat))


def combine_uciqe(sigma_c: float, con_l: float, mu_s: float) -> float:
    c1, c2, c3 = UCIQE_COEFFS
    return c1 * sigma_c + c2 * con_l + c3 * mu_s


def uciqe(img: np.ndarray) -> float:
    """Weighted sum of chroma spread, luminance contrast and mean saturation."""
    return combine_uciqe(*uciqe_components(img))


# ---------------------------------------------------------------------------
# composite underwater quality measure


def _trimmed_stats(values: np.ndarray, trim: float = UIQM_TRIM) -> tuple[float, float]:
    """Mean and variance of the sample with `trim` fraction dropped at each end."""
    flat = np.sort(values, axis=None)
    cut = int(trim * flat.size)
    core = flat[cut : flat.size - cut] if flat.size > 2 * cut else flat
    mu = float(np.mean(core))
    return mu, float(np.mean((core - mu) ** 2))


def _blocks(plane: np.ndarray, size: int = UIQM_BLOCK) -> Optional[tuple[np.ndarray, np.ndarray]]:
    """Per-block (max, min) over the largest size-divisible crop; None if no full block fits."""
    k1, k2 = plane.shape[0] // size, plane.shape[1] // size
    if k1 == 0 or k2 == 0:
        return None
    tiles = plane[: k1 * size, : k2 * size].reshape(k1, size, k2, size)
    return tiles.max(axis=(1, 3)), tiles.min(axis=(1, 3))


def _sobel_magnitude(plane: np.ndarray) -> np.ndarray:
    p = np.pad(plane, 1, mode="reflect")
    gx = (p[:-2, 2:] + 2 * p[1:-1, 2:] + p[2:, 2:]) - (p[:-2, :-2] + 2 * p[1:-1, :-2] + p[2:, :-2])
    gy = (p[2:, :-2] + 2 * p[2:, 1:-1] + p[2:, 2:]) - (p[:-2, :-2] + 2 * p[:-2, 1:-1] + p[:-2, 2:])
    return np.hypot(gx, gy)


def _eme(plane: np.ndarray) -> float:
    """Enhancement measure: 2/K * sum log(max/min) over blocks, floors at 1 guarding log(0)."""
    bm = _blocks(plane)
    if bm is None:
        return 0.0
    hi = np.maximum(bm[0], 1.0)
    lo = np.maximum(bm[1], 1.0)
    return float(2.0 / hi.size * np.sum(np.log(hi / lo)))


def _log_amee(plane: np.ndarray) -> float:
    """Entropy-weighted Michelson block contrast: -1/K * sum m*log(m)."""
    bm = _blocks(plane)
    if bm is None:
        return 0.0
    top = bm[0] - bm[1]
    bot = bm[0] + bm[1]
    m = np.divide(top, bot, out=np.zeros_like(top), where=bot > 0)
    terms = np.where(m > 0, m * np.log(m, out=np.zeros_like(m), where=m > 0), 0.0)
    return float(-np.sum(terms) / m.size)


def uicm(img: np.ndarray) -> float:
    """Colorfulness from alpha-trimmed statistics of the RG / YB opponent planes."""
    img = _check_image(img) * 255.0
    r, g, b = img[..., 0], img[..., 1], img[..., 2]
    mu_rg, var_rg = _trimmed_stats(r - g)
    mu_yb, var_yb = _trimmed_stats((r + g) / 2.0 - b)
    return -0.0268 * math.hypot(mu_rg, mu_yb) + 0.1586 * math.sqrt(var_rg + var_yb)


def uism(img: np.ndarray) -> float:
    """Sharpness: luma-weighted EME of channel-masked edge magnitudes."""
    img = _check_image(img) * 255.0
    total = 0.0
    for weight, channel in zip(UISM_LUMA, np.moveaxis(img, -1, 0)):
        total += weight * _eme(_sobel_magnitude(channel) * channel)
    return total


def uiconm(img: np.ndarray) -> float:
    """Contrast: logarithmic AMEE of the luma plane over blocks."""
    img = _check_image(img)
    wr, wg, wb = UISM_LUMA
    gray = wr * img[..., 0] + wg * img[..., 1] + wb * img[..., 2]
    return _log_amee(gray)


def uiqm(img: np.ndarray, weights: UiqmWeights | None = None) -> UiqmScores:
    """Composite score c1*UICM + c2*UISM + c3*UIConM with its components."""
    w = weights or UiqmWeights()
    u_c, u_s, u_n = uicm(img), uism(img), uiconm(img)
    return UiqmScores(uicm=u_c, uism=u_s, uiconm=u_n, uiqm=w.c1 * u_c + w.c2 * u_s + w.c3 * u_n)


# ---------------------------------------------------------------------------
# directory-level evaluation report

REPORT_COLUMNS = ("image_id", "mse", "psnr_db", "ssim", "uciqe", "uicm", "uism", "uiconm", "uiqm")


@dataclass
class MetricRow:
    image_id: str
    mse: Optional[float] = None
    psnr_db: Optional[float] = None
    ssim: Optional[float] = None
    uciqe: Optional[float] = None
    uicm: Optional[float] = None
    uism: Optional[float] = None
    uiconm: Optional[float] = None
    uiqm: Optional[float] = None
    error: Optional[str] = None

    def values(self) -> dict[str, Optional[float]]:
        return {c: getattr(self, c) for c in REPORT_COLUMNS[1:]}


@dataclass
class MetricReport:
    rows: list[MetricRow] = field(default_factory=list)
    aggregate: Optional[MetricRow] = None

    def finalize(self) -> "MetricReport":
        """Compute the aggregate row (means of each populated column); None if no valid rows."""
        valid = [r for r in self.rows if r.error is None]
        if not valid:
            self.aggregate = None
            return self
        agg = MetricRow(image_id="AGGREGATE")
        for col in REPORT_COLUMNS[1:]:
            vals = [getattr(r, col) for r in valid if getattr(r, col) is not None]
            if vals:
                setattr(agg, col, sum(vals) / len(vals))
        self.aggregate = agg
        return self

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(list(REPORT_COLUMNS) + ["error"])
            for row in self.rows + ([self.aggregate] if self.aggregate else []):
                writer.writerow(
                    [row.image_id]
                    + ["" if row.values()[c] is None else f"{row.values()[c]:.6f}" for c in REPORT_COLUMNS[1:]]
                    + [row.error or ""]
                )

    def to_json(self, path: str | Path) -> None:
        payload = {
            "rows": [{"image_id": r.image_id, **r.values(), "error": r.error} for r in self.rows],
            "aggregate": None if self.aggregate is None else {"image_id": "AGGREGATE", **self.aggregate.values()},
        }
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=2)


def metrics_for_pair(image_id: str, pred: np.ndarray, gt: Optional[np.ndarray]) -> MetricRow:
    row = MetricRow(image_id=image_id)
    if gt is not None:
        row.mse, row.psnr_db = mse_psnr(pred, gt)
        row.ssim = ssim_index(pred, gt)
    row.uciqe = uciqe(pred)
    scores = uiqm(pred)
    row.uicm, row.uism, row.uiconm, row.uiqm = scores.uicm, scores.uism, scores.uiconm, scores.uiqm
    return row


def evaluate_dir(pred_dir: str | Path, gt_dir: str | Path | None = None) -> MetricReport:
    """Score every image in pred_dir, pairing by filename with gt_dir when given.

    Unreadable or unmatched images produce per-image error rows; the run
    continues and the aggregate covers the valid rows only.
    """
    report = MetricReport()
    for pred_path in list_images(pred_dir):
        image_id = pred_path.stem
        try:
            pred = load_image(pred_path)
            gt = None
            if gt_dir is not None:
                gt_path = Path(gt_dir) / pred_path.name
                if not gt_path.exists():
                    report.rows.append(MetricRow(image_id=image_id, error=f"missing counterpart {gt_path.name}"))
                    continue
                gt = load_image(gt_path)
            report.rows.append(metrics_for_pair(image_id, pred, gt))
        except Exception as exc:
            report.rows.append(MetricRow(image_id=image_id, error=str(exc)))
    return report.finalize()
