"""Paired dataset ingestion, train-time geometry, and synthetic degradation.

Datasets live on disk as ``<root>/raw/<id>.png`` + ``<root>/reference/<id>.png``
with matching filename stems. Training resizes both images to 350x350 and
takes one shared random 320x320 crop; test images pass through untouched.

The degradation generator turns clean images into plausibly underwater ones
(channel-wise exponential attenuation over a synthetic depth ramp plus an
ambient haze term), so toy paired sets can be built without any external
dataset.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterator

import numpy as np
import torch
import torch.nn.functional as F

from .imgio import list_images, load_image, save_image

RESIZE_SIZE = 350
CROP_SIZE = 320


class DatasetError(Exception):
    pass


@dataclass
class PairedSample:
    raw: np.ndarray
    reference: np.ndarray
    id: str


def list_pair_ids(root: str | Path) -> list[str]:
    """Sorted filename stems present in both raw/ and reference/; warns on mismatches."""
    root = Path(root)
    raw_dir, ref_dir = root / "raw", root / "reference"
    if not raw_dir.is_dir() or not ref_dir.is_dir():
        raise DatasetError(f"dataset root {root} must contain raw/ and reference/ subdirectories")
    raw_ids = {p.stem: p for p in list_images(raw_dir)}
    ref_ids = {p.stem: p for p in list_images(ref_dir)}
    for stem in sorted(set(raw_ids) ^ set(ref_ids)):
        side = "reference" if stem in raw_ids else "raw"
        warnings.warn(f"skipping {stem!r}: no {side} counterpart", RuntimeWarning)
    return sorted(set(raw_ids) & set(ref_ids))


def _find_image(directory: Path, stem: str) -> Path:
    for p in list_images(directory):
        if p.stem == stem:
            return p
    raise DatasetError(f"no image with stem {stem!r} under {directory}")


def load_pair(root: str | Path, pair_id: str) -> PairedSample:
    root = Path(root)
    return PairedSample(
        raw=load_image(_find_image(root / "raw", pair_id)),
        reference=load_image(_find_image(root / "reference", pair_id)),
        id=pair_id,
    )


def load_pairs(root: str | Path, split: str = "train", seed: int = 0) -> Iterator[PairedSample]:
    """Stream matched pairs: filename order for 'test', seeded shuffle for 'train'."""
    if split not in ("train", "test"):
        raise ValueError(f"split must be 'train' or 'test', got {split!r}")
    ids = list_pair_ids(root)
    if not ids:
        raise DatasetError(f"no matched raw/reference pairs under {root}")
    if split == "train":
        order = np.random.default_rng(seed).permutation(len(ids))
        ids = [ids[i] for i in order]
    for pair_id in ids:
        yield load_pair(root, pair_id)


def resize_bilinear(img: np.ndarray, height: int, width: int) -> np.ndarray:
    """Deterministic bilinear resize of an HxWx3 float array."""
    t = torch.from_numpy(np.ascontiguousarray(img.transpose(2, 0, 1)))[None]
    out = F.interpolate(t, size=(height, width), mode="bilinear", align_corners=False, antialias=False)
    return out[0].numpy().transpose(1, 2, 0)


def train_transform(
    sample: PairedSample,
    seed: int,
    resize_to: int = RESIZE_SIZE,
    crop_to: int = CROP_SIZE,
) -> PairedSample:
    """Resize both images to resize_to², then take one shared random crop_to² window."""
    if crop_to > resize_to:
        raise ValueError(f"crop size {crop_to} exceeds resize size {resize_to}")
    rng = np.random.default_rng(seed)
    top = int(rng.integers(0, resize_to - crop_to + 1))
    left = int(rng.integers(0, resize_to - crop_to + 1))

    def pipeline(img: np.ndarray) -> np.ndarray:
        resized = resize_bilinear(img, resize_to, resize_to)
        return np.clip(resized[top : top + crop_to, left : left + crop_to], 0.0, 1.0)

    return PairedSample(raw=pipeline(sample.raw), reference=pipeline(sample.reference), id=sample.id)


# ---------------------------------------------------------------------------
# parametric degradation


@dataclass
class DegradeParams:
    """Channel attenuation (per unit depth), haze mix, ambient water color, and jitter seed."""

    attenuation: tuple[float, float, float]
    haze_strength: float
    ambient: tuple[float, float, float]
    seed: int = 0
    jitter: float = 0.0

    def with_seed(self, seed: int) -> "DegradeParams":
        return replace(self, seed=seed)


DEGRADE_PRESETS: dict[str, DegradeParams] = {
    # Attenuation ordering mimics water: red dies first in bluish/greenish scenes.
    "bluish": DegradeParams(attenuation=(1.8, 0.7, 0.25), haze_strength=0.7, ambient=(0.06, 0.28, 0.48), jitter=0.15),
    "greenish": DegradeParams(attenuation=(1.6, 0.35, 0.9), haze_strength=0.7, ambient=(0.08, 0.42, 0.22), jitter=0.15),
    "yellowish": DegradeParams(attenuation=(0.4, 0.55, 1.6), haze_strength=0.6, ambient=(0.42, 0.36, 0.10), jitter=0.15),
    "lowlight": DegradeParams(attenuation=(1.4, 1.3, 1.2), haze_strength=0.25, ambient=(0.03, 0.04, 0.06), jitter=0.1),
}


def degrade_preset(name: str, seed: int = 0) -> DegradeParams:
    if name not in DEGRADE_PRESETS:
        raise ValueError(f"unknown degradation preset {name!r}; choose from {sorted(DEGRADE_PRESETS)}")
    return DEGRADE_PRESETS[name].with_seed(seed)


def degrade_params_from_file(path: str | Path) -> DegradeParams:
    """Read degradation parameters from a flat key = value text file.

    Keys: attenuation_r/g/b, haze_strength, ambient_r/g/b, seed, jitter.
    Unknown keys are errors, mirroring the training config format.
    """
    values: dict[str, float] = {}
    known = {"attenuation_r", "attenuation_g", "attenuation_b", "haze_strength",
             "ambient_r", "ambient_g", "ambient_b", "seed", "jitter"}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        text = line.split("#", 1)[0].strip()
        if not text:
            continue
        if "=" not in text:
            raise ValueError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
        key, raw = (part.strip() for part in text.split("=", 1))
        if key not in known:
            raise ValueError(f"{path}:{lineno}: unknown degradation key {key!r}")
        values[key] = float(raw)
    missing = {k for k in known if k not in values and k not in ("seed", "jitter")}
    if missing:
        raise ValueError(f"{path}: missing degradation keys {sorted(missing)}")
    return DegradeParams(
        attenuation=(values["attenuation_r"], values["attenuation_g"], values["attenuation_b"]),
        haze_strength=values["haze_strength"],
        ambient=(values["ambient_r"], values["ambient_g"], values["ambient_b"]),
        seed=int(values.get("seed", 0)),
        jitter=values.get("jitter", 0.0),
    )


def synthesize_clean_image(size: int = 72, seed: int = 0) -> np.ndarray:
    """Structured synthetic 'clean' image: smooth color field plus shapes and texture.

    Gives the toy pipeline something with edges, color variety and luminance
    range, without shipping or downloading any real dataset.
    """
    rng = np.random.default_rng(seed)
    yy, xx = np.meshgrid(np.linspace(0, 1, size), np.linspace(0, 1, size), indexing="ij")
    img = np.stack(
        [
            0.25 + 0.5 * (a * xx + b * yy + c * np.sin(2 * np.pi * (f * xx + g * yy)))
            for a, b, c, f, g in rng.uniform([-0.6, -0.6, 0.1, 0.5, 0.5], [0.6, 0.6, 0.35, 2.5, 2.5], size=(3, 5))
        ],
        axis=-1,
    )
    for _ in range(4):
        color = rng.uniform(0.1, 0.9, size=3)
        cy, cx = rng.uniform(0.15, 0.85, size=2) * size
        r = rng.uniform(0.08, 0.22) * size
        mask = (yy * size - cy) ** 2 + (xx * size - cx) ** 2 < r**2
        img[mask] = color
    return np.clip(img, 0.0, 1.0)


def build_toy_dataset(
    root: str | Path,
    n_pairs: int = 8,
    size: int = 72,
    seed: int = 0,
    presets: tuple[str, ...] = ("bluish", "greenish", "yellowish", "lowlight"),
) -> list[str]:
    """Write a self-degraded paired dataset under root (raw/ + reference/); returns the ids."""
    root = Path(root)
    (root / "raw").mkdir(parents=True, exist_ok=True)
    (root / "reference").mkdir(parents=True, exist_ok=True)
    ids = []
    for i in range(n_pairs):
        clean = synthesize_clean_image(size=size, seed=seed + i)
        params = degrade_preset(presets[i % len(presets)], seed=seed + i)
        pair_id = f"toy_{i:03d}"
        save_image(root / "reference" / f"{pair_id}.png", clean)
        save_image(root / "raw" / f"{pair_id}.png", degrade(clean, params))
        ids.append(pair_id)
    return ids


def degrade(clean: np.ndarray, params: DegradeParams) -> np.ndarray:
    """Apply the direct-transmission + ambient formation model over a depth ramp.

    out_c = clean_c * exp(-beta_c * d) + ambient_c * haze * (1 - exp(-beta_c * d))

    with depth d rising linearly to 1 at the bottom row (strictly positive
    everywhere, so infinite attenuation washes the whole frame to ambient).
    The seed jitters attenuation multiplicatively so a preset yields varied
    but reproducible degradations across a toy set.
    """
    clean = np.asarray(clean, dtype=np.float64)
    if clean.ndim != 3 or clean.shape[2] != 3:
        raise ValueError(f"clean image must be HxWx3, got {clean.shape}")
    h = clean.shape[0]
    depth = (np.arange(1, h + 1, dtype=np.float64) / h)[:, None, None]

    rng = np.random.default_rng(params.seed)
    scale = 1.0 + params.jitter * rng.uniform(-1.0, 1.0, size=3)
    beta = np.asarray(params.attenuation, dtype=np.float64) * scale
    transmission = np.exp(-beta[None, None, :] * depth)
    ambient = np.asarray(params.ambient, dtype=np.float64)[None, None, :]
    out = clean * transmission + ambient * params.haze_strength * (1.0 - transmission)
    return np.clip(out, 0.0, 1.0)
