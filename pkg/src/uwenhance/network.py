"""The three trainable blocks and their composition into the enhancement model.

A pixel-level RGB block (plain fully convolutional, no downsampling)
produces a first refinement; its output converts to HSV where a
global-adjust block regresses four piecewise linear curves and rescales the
planes; an attention block blends both candidates per pixel and channel.
All tensors flowing through the model are NCHW floats in [0, 1].
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import torch
from torch import Tensor, nn

from .colorspace import hsv_to_rgb, rgb_to_hsv
from .curves import CurveSet, apply_curves

VARIANTS = ("full", "rgb_only", "no_attention")


@dataclass
class ModelConfig:
    """Architecture hyperparameters; defaults give the full three-block model."""

    hidden_channels: int = 64
    knot_intervals: int = 16
    rgb_layers: int = 8
    attention_layers: int = 8
    hsv_conv_layers: int = 5
    hsv_pool_layers: int = 4
    negative_slope: float = 0.2
    bn_momentum: float = 0.1
    variant: str = "full"

    def __post_init__(self) -> None:
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.knot_intervals < 1:
            raise ValueError("knot_intervals must be >= 1")

    @property
    def min_spatial(self) -> int:
        """Smallest accepted input side length for the configured variant."""
        return 3 if self.variant == "rgb_only" else 2 ** self.hsv_pool_layers

    def to_dict(self) -> dict:
        return {
            "hidden_channels": self.hidden_channels,
            "knot_intervals": self.knot_intervals,
            "rgb_layers": self.rgb_layers,
            "attention_layers": self.attention_layers,
            "hsv_conv_layers": self.hsv_conv_layers,
            "hsv_pool_layers": self.hsv_pool_layers,
            "negative_slope": self.negative_slope,
            "bn_momentum": self.bn_momentum,
            "variant": self.variant,
        }


@dataclass
class ModelOutput:
    """Every intermediate product of a forward pass, for losses and inspection."""

    enhanced: Tensor
    rgb_branch: Tensor
    hsv_branch_rgb: Optional[Tensor] = None
    attention: Optional[Tensor] = None
    curves: Optional[CurveSet] = None


def _conv_bn_stack(in_ch: int, hidden: int, out_ch: int, layers: int, slope: float, momentum: float) -> nn.Sequential:
    """conv3x3 + BN + LeakyReLU repeated, ending in conv3x3 + BN + Sigmoid."""
    modules: list[nn.Module] = []
    ch = in_ch
    for i in range(layers - 1):
        modules += [
            nn.Conv2d(ch, hidden, 3, stride=1, padding=1),
            nn.BatchNorm2d(hidden, momentum=momentum),
            nn.LeakyReLU(slope, inplace=True),
        ]
        ch = hidden
    modules += [
        nn.Conv2d(ch, out_ch, 3, stride=1, padding=1),
        nn.BatchNorm2d(out_ch, momentum=momentum),
        nn.Sigmoid(),
    ]
    return nn.Sequential(*modules)


class RgbPixelBlock(nn.Module):
    """Plain fully convolutional refinement: spatial size preserved, output in (0, 1)."""

    def __init__(self, config: ModelConfig):
        super().__init__()
        self.net = _conv_bn_stack(
            3, config.hidden_channels, 3, config.rgb_layers, config.negative_slope, config.bn_momentum
        )

    def forward(self, raw: Tensor) -> Tensor:
        if raw.shape[-2] < 3 or raw.shape[-1] < 3:
            raise ValueError(f"spatial dims must be at least 3x3, got {tuple(raw.shape[-2:])}")
        return self.net(raw)


class HsvGlobalBlock(nn.Module):
    """Regresses four curve knot vectors from pooled features and applies them.

    The convolution/pool trunk only feeds the regression head; the adjusted
    image keeps the input's spatial dimensions.
    """

    def __init__(self, config: ModelConfig):
        super().__init__()
        self.knot_intervals = config.knot_intervals
        self.pool_layers = config.hsv_pool_layers
        hidden = config.hidden_channels
        modules: list[nn.Module] = []
        ch = 3
        for i in range(config.hsv_conv_layers):
            modules += [nn.Conv2d(ch, hidden, 3, stride=1, padding=1), nn.LeakyReLU(config.negative_slope, inplace=True)]
            if i < config.hsv_pool_layers:
                modules.append(nn.MaxPool2d(2))
            ch = hidden
        self.trunk = nn.Sequential(*modules)
        self.head = nn.Linear(hidden, 4 * (config.knot_intervals + 1))
        self._init_head()

    def _init_head(self) -> None:
        # Near-identity start: knots sit at ~1 so the curves barely rescale,
        # while small nonzero weights keep gradient flowing into the trunk.
        nn.init.normal_(self.head.weight, std=1e-3)
        nn.init.ones_(self.head.bias)

    def force_identity_curves(self) -> None:
        """Pin the head to emit exactly unity curves (diagnostic/ablation aid)."""
        with torch.no_grad():
            self.head.weight.zero_()
            self.head.bias.fill_(1.0)

    def regress_curves(self, hsv: Tensor) -> CurveSet:
        """hsv is channels-last (N, H, W, 3); returns per-image curves (N, M+1)."""
        side = 2 ** self.pool_layers
        if hsv.shape[-3] < side or hsv.shape[-2] < side:
            raise ValueError(
                f"spatial dims must be at least {side}x{side} for {self.pool_layers} pooling stages, "
                f"got {tuple(hsv.shape[-3:-1])}"
            )
        feats = self.trunk(hsv.movedim(-1, 1))
        pooled = feats.mean(dim=(-2, -1))
        return CurveSet.from_flat(self.head(pooled), self.knot_intervals)

    def forward(self, hsv: Tensor) -> tuple[Tensor, CurveSet]:
        curves = self.regress_curves(hsv)
        adjusted = apply_curves(hsv, curves)
        return adjusted, curves


class AttentionBlock(nn.Module):
    """Pixel-level fusion weights from raw + both branch outputs (9 channels in, 6 out)."""

    def __init__(self, config: ModelConfig):
        super().__init__()
        self.net = _conv_bn_stack(
            9, config.hidden_channels, 6, config.attention_layers, config.negative_slope, config.bn_momentum
        )

    def forward(self, raw: Tensor, rgb_out: Tensor, hsv_out_rgb: Tensor) -> Tensor:
        if not raw.shape == rgb_out.shape == hsv_out_rgb.shape:
            raise ValueError(
                f"dimension mismatch: raw {tuple(raw.shape)}, rgb {tuple(rgb_out.shape)}, "
                f"hsv {tuple(hsv_out_rgb.shape)}"
            )
        return self.net(torch.cat([raw, rgb_out, hsv_out_rgb], dim=1))


def blend_with_attention(rgb_out: Tensor, hsv_out_rgb: Tensor, attention: Tensor) -> Tensor:
    """Weighted sum of the two candidates; first 3 map channels weight the RGB branch."""
    if attention.shape[1] != 6:
        raise ValueError(f"attention map must have 6 channels, got {attention.shape[1]}")
    fused = attention[:, :3] * rgb_out + attention[:, 3:] * hsv_out_rgb
    return torch.clamp(fused, 0.0, 1.0)


class EnhancementNet(nn.Module):
    """Composition of the three blocks, returning all intermediates.

    Variants: ``full`` uses attention fusion, ``no_attention`` averages the
    two branches, ``rgb_only`` drops the HSV and attention blocks entirely.
    """

    def __init__(self, config: Optional[ModelConfig] = None):
        super().__init__()
        self.config = config or ModelConfig()
        self.rgb_block = RgbPixelBlock(self.config)
        self.hsv_block = HsvGlobalBlock(self.config) if self.config.variant != "rgb_only" else None
        self.attention_block = AttentionBlock(self.config) if self.config.variant == "full" else None

    def n_parameters(self) -> int:
        return sum(p.numel() for p in self.parameters())

    def forward(self, raw: Tensor, attention_override: Optional[Tensor] = None) -> ModelOutput:
        """Run the enhancement pipeline on an NCHW batch in [0, 1].

        ``attention_override`` substitutes a fixed 6-channel map for the
        learned one (diagnostics and ablation checks).
        """
        single = raw.ndim == 3
        if single:
            raw = raw.unsqueeze(0)
        if raw.ndim != 4 or raw.shape[1] != 3:
            raise ValueError(f"expected NCHW input with 3 channels, got {tuple(raw.shape)}")
        m = self.config.min_spatial
        if raw.shape[-2] < m or raw.shape[-1] < m:
            raise ValueError(f"variant {self.config.variant!r} needs spatial dims >= {m}, got {tuple(raw.shape[-2:])}")

        rgb_out = self.rgb_block(raw)
        if self.config.variant == "rgb_only":
            out = ModelOutput(enhanced=rgb_out, rgb_branch=rgb_out)
        else:
            hsv_in = rgb_to_hsv(rgb_out.movedim(1, -1))
            hsv_adj, curve_set = self.hsv_block(hsv_in)
            hsv_rgb = hsv_to_rgb(hsv_adj).movedim(-1, 1)
            if self.config.variant == "no_attention":
                enhanced = torch.clamp(0.5 * (rgb_out + hsv_rgb), 0.0, 1.0)
                attention = None
            else:
                attention = attention_override if attention_override is not None else self.attention_block(raw, rgb_out, hsv_rgb)
                enhanced = blend_with_attention(rgb_out, hsv_rgb, attention)
            out = ModelOutput(
                enhanced=enhanced, rgb_branch=rgb_out, hsv_branch_rgb=hsv_rgb, attention=attention, curves=curve_set
            )
        if single:
            out = ModelOutput(
                enhanced=out.enhanced.squeeze(0),
                rgb_branch=out.rgb_branch.squeeze(0),
                hsv_branch_rgb=None if out.hsv_branch_rgb is None else out.hsv_branch_rgb.squeeze(0),
                attention=None if out.attention is None else out.attention.squeeze(0),
                curves=out.curves,
            )
        return out
