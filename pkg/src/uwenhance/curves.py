"""Piecewise linear scaling curves and their application to HSV images.

A curve is a vector of M+1 knot values k_0..k_M over the unit interval. It
evaluates as

    S(x) = k_0 + sum_{m=0}^{M-1} (k_{m+1} - k_m) * clamp(M*x - m, 0, 1)

which linearly interpolates between consecutive knots and saturates outside
[0, 1]. The knots are typically regressed by a network head, so no sign or
monotonicity constraint is imposed.

Four curves adjust an HSV image: value scaled by a curve over value,
saturation scaled by curves over saturation and over hue (composed
multiplicatively), and hue scaled by a curve over hue with wraparound.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import Tensor


def eval_curve(knots: Tensor, x: Tensor) -> Tensor:
    """Evaluate a piecewise linear curve at x.

    ``knots`` has shape (..., M+1); its leading dimensions are treated as
    batch dimensions aligned with the *leading* dimensions of ``x``. A bare
    (M+1,) vector applies one curve to every element of ``x``.
    """
    if knots.ndim < 1 or knots.shape[-1] < 2:
        raise ValueError(f"knots must have at least 2 entries in the last dimension, got shape {tuple(knots.shape)}")
    m = knots.shape[-1] - 1
    batch_shape = knots.shape[:-1]
    pad = x.ndim - len(batch_shape)
    if pad < 0:
        raise ValueError(f"knots batch shape {tuple(batch_shape)} has more dimensions than x {tuple(x.shape)}")
    view = batch_shape + (1,) * pad

    out = knots[..., 0].reshape(view).expand_as(x)
    for i in range(m):
        step = (knots[..., i + 1] - knots[..., i]).reshape(view)
        out = out + step * torch.clamp(m * x - i, 0.0, 1.0)
    return out


def identity_knots(knot_intervals: int, **tensor_kwargs) -> Tensor:
    """Knot vector reproducing S(x) = x on [0, 1]."""
    return torch.linspace(0.0, 1.0, knot_intervals + 1, **tensor_kwargs)


def wrap_unit(x: Tensor) -> Tensor:
    """Wrap values onto [0, 1), preserving circular topology (used for hue)."""
    return torch.remainder(x, 1.0)


@dataclass
class CurveSet:
    """The four adjustment curves regressed per image.

    Each field has shape (..., M+1) with shared M. ``value_on_value`` scales
    the value plane as a function of value, ``sat_on_sat`` and ``sat_on_hue``
    jointly scale saturation, and ``hue_on_hue`` scales hue.
    """

    value_on_value: Tensor
    sat_on_sat: Tensor
    sat_on_hue: Tensor
    hue_on_hue: Tensor

    def __post_init__(self) -> None:
        sizes = {c.shape[-1] for c in self.all_curves()}
        if len(sizes) != 1:
            raise ValueError(f"all four curves must share the same knot count, got {sorted(sizes)}")

    @property
    def knot_intervals(self) -> int:
        return self.value_on_value.shape[-1] - 1

    def all_curves(self) -> tuple[Tensor, Tensor, Tensor, Tensor]:
        return (self.value_on_value, self.sat_on_sat, self.sat_on_hue, self.hue_on_hue)

    @classmethod
    def from_flat(cls, flat: Tensor, knot_intervals: int) -> "CurveSet":
        """Split a regression-head output of shape (..., 4*(M+1)) into four curves."""
        n = knot_intervals + 1
        if flat.shape[-1] != 4 * n:
            raise ValueError(f"expected trailing dimension {4 * n} for M={knot_intervals}, got {flat.shape[-1]}")
        v, ss, sh, hh = flat.split(n, dim=-1)
        return cls(v, ss, sh, hh)

    @classmethod
    def unity(cls, knot_intervals: int, **tensor_kwargs) -> "CurveSet":
        """Curves identically 1, making apply_curves the identity map."""
        ones = torch.ones(knot_intervals + 1, **tensor_kwargs)
        return cls(ones, ones.clone(), ones.clone(), ones.clone())


def apply_curves(hsv: Tensor, curve_set: CurveSet) -> Tensor:
    """Apply the four scaling curves to an HSV image tensor (..., 3).

    All four curves are evaluated on the *input* planes. Value and
    saturation are clamped back to [0, 1] after scaling; hue wraps on
    [0, 1) instead, since clamping would tear its circular topology.
    """
    h, s, v = hsv.unbind(-1)
    v_out = torch.clamp(v * eval_curve(curve_set.value_on_value, v), 0.0, 1.0)
    s_mid = torch.clamp(s * eval_curve(curve_set.sat_on_sat, s), 0.0, 1.0)
    s_out = torch.clamp(s_mid * eval_curve(curve_set.sat_on_hue, h), 0.0, 1.0)
    h_out = wrap_unit(h * eval_curve(curve_set.hue_on_hue, h))
    return torch.stack([h_out, s_out, v_out], dim=-1)
