"""Analytic-vs-finite-difference gradient verification.

Every differentiable surface of the package gets a check: the two color
space conversions (per-pixel Jacobians), curve evaluation (gradients in x
and in every knot), the whole model (random scalar parameters), and the
training objective (gradients w.r.t. both evaluation sites). Checks run in
float64; sampled points keep a safety margin from branch boundaries so the
central differences themselves are trustworthy.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import torch

from . import colorspace, curves, losses
from .features import RandomExtractor
from .network import EnhancementNet, ModelConfig

COLORSPACE_TOL = 1e-3
CURVES_TOL = 1e-3
NETWORK_TOL = 2e-2
LOSSES_TOL = 1e-2

# Sampling keeps at least this distance from max/min ties and curve knots;
# wider than the FD step by enough that truncation error stays below tol.
TIE_MARGIN = 1e-2
KNOT_MARGIN = 1e-3


@dataclass
class CheckResult:
    name: str
    max_rel_err: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_rel_err <= self.tolerance


def _rel_err(analytic: torch.Tensor, numeric: torch.Tensor, floor: float = 1e-6) -> float:
    denom = torch.clamp(numeric.abs(), min=floor)
    return float(((analytic - numeric).abs() / denom).max())


def _pixelwise_jacobians(fn: Callable, points: torch.Tensor) -> torch.Tensor:
    """Analytic (n, 3, 3) Jacobians of a per-pixel map on (n, 3) points."""
    x = points.clone().requires_grad_(True)
    out = fn(x)
    rows = []
    for j in range(3):
        grad = torch.autograd.grad(out[:, j].sum(), x, retain_graph=j < 2)[0]
        rows.append(grad)
    return torch.stack(rows, dim=1)


def _fd_jacobians(fn: Callable, points: torch.Tensor, step: float) -> torch.Tensor:
    cols = []
    for c in range(3):
        offset = torch.zeros_like(points)
        offset[:, c] = step
        cols.append((fn(points + offset) - fn(points - offset)) / (2.0 * step))
    return torch.stack(cols, dim=2)


def sample_interior_rgb(n: int, seed: int, margin: float = TIE_MARGIN) -> torch.Tensor:
    """Random RGB points with all pairwise channel gaps > margin, away from 0/1."""
    rng = np.random.default_rng(seed)
    points = []
    while len(points) < n:
        cand = rng.uniform(0.02, 0.98, size=(4 * n, 3))
        gaps = np.stack(
            [
                np.abs(cand[:, 0] - cand[:, 1]),
                np.abs(cand[:, 1] - cand[:, 2]),
                np.abs(cand[:, 0] - cand[:, 2]),
            ],
            axis=1,
        )
        points.extend(cand[(gaps > margin).all(axis=1)])
    return torch.tensor(np.asarray(points[:n]), dtype=torch.float64)


def sample_interior_hsv(n: int, seed: int, margin: float = KNOT_MARGIN) -> torch.Tensor:
    """Random HSV points with hue away from the 60-degree ramp knots."""
    rng = np.random.default_rng(seed)
    points = []
    while len(points) < n:
        cand = rng.uniform(0.02, 0.98, size=(4 * n, 3))
        frac = np.abs(cand[:, 0] * 6.0 - np.round(cand[:, 0] * 6.0))
        points.extend(cand[frac > 6.0 * margin])
    return torch.tensor(np.asarray(points[:n]), dtype=torch.float64)


def check_colorspace(n_points: int = 1000, seed: int = 0, step: float = 1e-4) -> list[CheckResult]:
    rgb = sample_interior_rgb(n_points, seed)
    fwd = CheckResult(
        "colorspace.rgb_to_hsv",
        _rel_err(_pixelwise_jacobians(colorspace.rgb_to_hsv, rgb), _fd_jacobians(colorspace.rgb_to_hsv, rgb, step)),
        COLORSPACE_TOL,
    )
    hsv = sample_interior_hsv(n_points, seed + 1)
    inv = CheckResult(
        "colorspace.hsv_to_rgb",
        _rel_err(_pixelwise_jacobians(colorspace.hsv_to_rgb, hsv), _fd_jacobians(colorspace.hsv_to_rgb, hsv, step)),
        CURVES_TOL,
    )
    return [fwd, inv]


def check_curves(n_points: int = 1000, knot_intervals: int = 16, seed: int = 0, step: float = 1e-4) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    knots = torch.tensor(rng.normal(0.5, 0.5, size=knot_intervals + 1), dtype=torch.float64)

    # x kept away from the knot abscissae m/M by the stated margin.
    xs = []
    while len(xs) < n_points:
        cand = rng.uniform(0.0, 1.0, size=4 * n_points)
        dist = np.abs(cand * knot_intervals - np.round(cand * knot_intervals))
        xs.extend(cand[dist > knot_intervals * KNOT_MARGIN])
    x = torch.tensor(np.asarray(xs[:n_points]), dtype=torch.float64)

    # gradient w.r.t. x
    xg = x.clone().requires_grad_(True)
    curves.eval_curve(knots, xg).sum().backward()
    fd_x = (curves.eval_curve(knots, x + step) - curves.eval_curve(knots, x - step)) / (2 * step)
    res_x = CheckResult("curves.eval_curve/dx", _rel_err(xg.grad, fd_x), CURVES_TOL)

    # gradient w.r.t. every knot (summed over the sample points)
    kg = knots.clone().requires_grad_(True)
    curves.eval_curve(kg, x).sum().backward()
    fd_k = torch.zeros_like(knots)
    for i in range(knots.numel()):
        offset = torch.zeros_like(knots)
        offset[i] = step
        fd_k[i] = (curves.eval_curve(knots + offset, x).sum() - curves.eval_curve(knots - offset, x).sum()) / (2 * step)
    res_k = CheckResult("curves.eval_curve/dknots", _rel_err(kg.grad, fd_k), CURVES_TOL)
    return [res_x, res_k]


def check_network(
    n_params: int = 20, seed: int = 0, step: float = 1e-5, side: int = 32, config: ModelConfig | None = None
) -> list[CheckResult]:
    """FD check of d(sum of output)/d(theta) for randomly chosen scalar parameters.

    The step sits well below the curvature scale of the conical hue
    composition (near-achromatic pixels), where coarser central differences
    stop tracking the exact analytic gradient.
    """
    torch.manual_seed(seed)
    model = EnhancementNet(config or ModelConfig()).double()
    model.train()
    x = torch.rand(1, 3, side, side, dtype=torch.float64, generator=torch.Generator().manual_seed(seed + 1))

    def objective() -> torch.Tensor:
        return model(x).enhanced.sum()

    model.zero_grad()
    objective().backward()

    params = [p for p in model.parameters() if p.requires_grad]
    sizes = np.array([p.numel() for p in params])
    rng = np.random.default_rng(seed + 2)
    picks = rng.choice(int(sizes.sum()), size=min(n_params, int(sizes.sum())), replace=False)

    worst = 0.0
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    with torch.no_grad():
        for flat_idx in picks:
            p_idx = int(np.searchsorted(offsets, flat_idx, side="right") - 1)
            local = int(flat_idx - offsets[p_idx])
            param = params[p_idx]
            analytic = float(param.grad.view(-1)[local])
            original = float(param.view(-1)[local])
            param.view(-1)[local] = original + step
            plus = float(objective())
            param.view(-1)[local] = original - step
            minus = float(objective())
            param.view(-1)[local] = original
            numeric = (plus - minus) / (2 * step)
            worst = max(worst, abs(analytic - numeric) / max(abs(numeric), 1.0))
    return [CheckResult("network.model_forward/dtheta", worst, NETWORK_TOL)]


def check_losses(seed: int = 0, side: int = 16, step: float = 1e-5, n_coords: int = 24) -> list[CheckResult]:
    """FD check of the total objective w.r.t. both prediction sites."""
    gen = torch.Generator().manual_seed(seed)
    pixel = (0.05 + 0.9 * torch.rand(1, 3, side, side, generator=gen)).double()
    final = (0.05 + 0.9 * torch.rand(1, 3, side, side, generator=gen)).double()
    gt = (0.05 + 0.9 * torch.rand(1, 3, side, side, generator=gen)).double()
    weights = losses.LossWeights()
    extractor = RandomExtractor(seed=seed).double()

    def objective(px: torch.Tensor, fi: torch.Tensor) -> torch.Tensor:
        return losses.total_loss(px, fi, gt, weights, epoch=0, extractor=extractor).total

    px = pixel.clone().requires_grad_(True)
    fi = final.clone().requires_grad_(True)
    objective(px, fi).backward()

    rng = np.random.default_rng(seed)
    worst = 0.0
    for grad, base, make_args in (
        (px.grad, pixel, lambda t: (t, final)),
        (fi.grad, final, lambda t: (pixel, t)),
    ):
        scale = float(grad.abs().max())
        for idx in rng.choice(base.numel(), size=n_coords, replace=False):
            offset = torch.zeros_like(base).view(-1)
            offset[idx] = step
            offset = offset.view_as(base)
            numeric = float((objective(*make_args(base + offset)) - objective(*make_args(base - offset))) / (2 * step))
            analytic = float(grad.view(-1)[idx])
            worst = max(worst, abs(analytic - numeric) / max(abs(numeric), 1e-3 * scale))
    return [CheckResult("losses.total_loss/dpred", worst, LOSSES_TOL)]


CHECKS: dict[str, Callable[[], list[CheckResult]]] = {
    "colorspace": check_colorspace,
    "curves": check_curves,
    "network": check_network,
    "losses": check_losses,
}


def run_checks(module: str | None = None) -> list[CheckResult]:
    names = [module] if module else list(CHECKS)
    results: list[CheckResult] = []
    for name in names:
        if name not in CHECKS:
            raise ValueError(f"unknown gradcheck module {name!r}; choose from {sorted(CHECKS)}")
        results.extend(CHECKS[name]())
    return results
