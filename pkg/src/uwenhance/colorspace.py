"""Differentiable RGB <-> HSV color space conversions.

Both directions are assembled from min/max/clamp primitives so they can sit
inside an autodiff graph. The inverse direction uses piecewise linear hue
ramps instead of the usual modular-arithmetic formulation, which keeps a
well-defined subgradient everywhere.

Conventions:
  * images are channels-last tensors of shape (..., 3) with values in [0, 1]
  * hue is stored normalized to [0, 1) (degrees / 360); saturation and value
    are plain [0, 1] planes
  * achromatic pixels carry hue 0 and saturation 0 by convention
  * max-channel ties resolve with fixed priority R > G > B, giving a
    deterministic one-sided subgradient
"""

from __future__ import annotations

import torch
from torch import Tensor

# Inputs further than this outside [0, 1] indicate a corrupted upstream
# producer rather than float round-off, and are rejected.
DOMAIN_TOL = 1e-6


def _validate_image(img: Tensor, name: str) -> None:
    if img.ndim < 1 or img.shape[-1] != 3:
        raise ValueError(f"{name} must have a trailing dimension of 3 channels, got shape {tuple(img.shape)}")
    if img.shape[:-1].numel() == 0:
        raise ValueError(f"{name} has no pixels (shape {tuple(img.shape)})")
    with torch.no_grad():
        if not torch.isfinite(img).all():
            raise ValueError(f"{name} contains NaN or Inf values")
        lo = float(img.min())
        hi = float(img.max())
    if lo < -DOMAIN_TOL or hi > 1.0 + DOMAIN_TOL:
        raise ValueError(f"{name} values must lie in [0, 1] (tolerance {DOMAIN_TOL:g}); found range [{lo:g}, {hi:g}]")


def rgb_to_hsv(rgb: Tensor) -> Tensor:
    """Convert an RGB image tensor (..., 3) in [0, 1] to HSV (..., 3).

    V is the channel maximum, S = (V - min)/V with S = 0 where V = 0, and
    hue follows the 60-degrees-per-sector rule, wrapped into [0, 1). Where
    all channels coincide the pixel is achromatic: S = 0, H = 0, and the
    undefined quotients contribute zero gradient.
    """
    _validate_image(rgb, "rgb")
    r, g, b = rgb.unbind(-1)

    # Fixed tie priority R > G > B keeps the selected branch deterministic.
    max_is_r = (r >= g) & (r >= b)
    max_is_g = ~max_is_r & (g >= b)
    max_is_b = ~(max_is_r | max_is_g)

    v = torch.where(max_is_r, r, torch.where(max_is_g, g, b))
    mn = torch.where(r <= g, torch.where(r <= b, r, b), torch.where(g <= b, g, b))
    delta = v - mn

    chromatic = delta > 0
    delta_safe = torch.where(chromatic, delta, torch.ones_like(delta))
    lit = v > 0
    v_safe = torch.where(lit, v, torch.ones_like(v))

    s = torch.where(lit, delta / v_safe, torch.zeros_like(v))

    # Hue in units of 60 degrees per branch, zeroed on achromatic pixels so
    # the undefined quotient never leaks gradient.
    h_sector = torch.where(
        max_is_r,
        (g - b) / delta_safe,
        torch.where(max_is_g, 2.0 + (b - r) / delta_safe, 4.0 + (r - g) / delta_safe),
    )
    deg = torch.where(chromatic, h_sector * 60.0, torch.zeros_like(h_sector))
    deg = torch.where(deg < 0, deg + 360.0, deg)
    return torch.stack([deg / 360.0, s, v], dim=-1)


def hsv_to_rgb(hsv: Tensor) -> Tensor:
    """Convert an HSV image tensor (..., 3) in [0, 1] to RGB (..., 3).

    Each channel is a piecewise linear ramp in hue, scaled by saturation and
    value. The ramps rise/fall over 60-degree spans via clamp(x, 0, 60), so
    the conversion is exact for chromatic colors and differentiable away
    from the ramp knots.
    """
    _validate_image(hsv, "hsv")
    h, s, v = hsv.unbind(-1)
    deg = h * 360.0
    chroma = s * v

    def ramp(offset: float) -> Tensor:
        return torch.clamp(deg - offset, 0.0, 60.0) / 60.0

    r = v - chroma * ramp(60.0) + chroma * ramp(240.0)
    g = v * (1.0 - s) + chroma * ramp(0.0) - chroma * ramp(180.0)
    b = v * (1.0 - s) + chroma * ramp(120.0) - chroma * ramp(300.0)
    return torch.clamp(torch.stack([r, g, b], dim=-1), 0.0, 1.0)
