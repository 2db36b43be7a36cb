"""Frozen convolutional feature extractors for the perceptual loss.

The perceptual term only needs *some* fixed feature map with declared
dimensions, so the extractor is pluggable: production runs use pretrained
VGG-19 features, while tests and offline environments use a fixed-seed
random stack that needs no downloads.
"""

from __future__ import annotations

import warnings

import torch
from torch import Tensor, nn

# Index of the last module to keep in torchvision's vgg19().features for a
# given named tap point (inclusive, ending at the ReLU after the conv).
_VGG19_TAPS = {
    "block3_conv4": 17,
    "block4_conv3": 24,
    "block4_conv4": 26,
    "block5_conv4": 35,
}

_IMAGENET_MEAN = (0.485, 0.456, 0.406)
_IMAGENET_STD = (0.229, 0.224, 0.225)


class IdentityExtractor(nn.Module):
    """Pass-through features; the perceptual loss degenerates to mean squared pixel error."""

    def forward(self, img: Tensor) -> Tensor:
        return img


class RandomExtractor(nn.Module):
    """Small frozen conv stack with fixed-seed random weights.

    Deterministic given `seed`, so tests can freeze expected values without
    downloading pretrained weights.
    """

    def __init__(self, seed: int = 0, channels: int = 16, layers: int = 2):
        super().__init__()
        gen = torch.Generator().manual_seed(seed)
        convs = []
        in_ch = 3
        for _ in range(layers):
            conv = nn.Conv2d(in_ch, channels, 3, stride=2, padding=1)
            with torch.no_grad():
                conv.weight.copy_(torch.randn(conv.weight.shape, generator=gen) * 0.2)
                conv.bias.zero_()
            convs.append(conv)
            in_ch = channels
        self.net = nn.Sequential(*convs)
        for p in self.parameters():
            p.requires_grad_(False)

    def forward(self, img: Tensor) -> Tensor:
        x = img
        for conv in self.net:
            x = torch.relu(conv(x))
        return x


class VggExtractor(nn.Module):
    """Pretrained VGG-19 features up to a named tap point, frozen.

    Weights download lazily through torchvision on first use; construction
    raises if they cannot be obtained.
    """

    def __init__(self, tap: str = "block4_conv3"):
        super().__init__()
        if tap not in _VGG19_TAPS:
            raise ValueError(f"unknown VGG tap {tap!r}; choose from {sorted(_VGG19_TAPS)}")
        from torchvision import models

        vgg = models.vgg19(weights=models.VGG19_Weights.IMAGENET1K_V1)
        self.features = nn.Sequential(*list(vgg.features.children())[: _VGG19_TAPS[tap] + 1])
        for p in self.parameters():
            p.requires_grad_(False)
        self.register_buffer("mean", torch.tensor(_IMAGENET_MEAN).view(1, 3, 1, 1))
        self.register_buffer("std", torch.tensor(_IMAGENET_STD).view(1, 3, 1, 1))
        self.eval()

    def forward(self, img: Tensor) -> Tensor:
        return self.features((img - self.mean) / self.std)


def build_extractor(name: str, seed: int = 0):
    """Instantiate an extractor by config name; 'vgg19' falls back to None with a warning if unavailable."""
    if name in ("none", ""):
        return None
    if name == "identity":
        return IdentityExtractor()
    if name == "random":
        return RandomExtractor(seed=seed)
    if name == "vgg19":
        try:
            return VggExtractor()
        except Exception as exc:  # pretrained weights unavailable (offline, etc.)
            warnings.warn(f"could not load VGG-19 features ({exc}); perceptual loss disabled", RuntimeWarning)
            return None
    raise ValueError(f"unknown feature extractor {name!r}; choose vgg19, random, identity or none")
