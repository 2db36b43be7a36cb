"""8-bit image file I/O, decoding to unit-interval float arrays."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image

IMAGE_EXTENSIONS = (".png", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff")


def load_image(path: str | Path) -> np.ndarray:
    """Decode an image file to an HxWx3 float64 array in [0, 1]."""
    with Image.open(path) as im:
        arr = np.asarray(im.convert("RGB"), dtype=np.float64)
    return arr / 255.0


def save_image(path: str | Path, img: np.ndarray) -> None:
    """Encode an HxWx3 float array in [0, 1] as an 8-bit image file."""
    data = np.clip(np.asarray(img, dtype=np.float64), 0.0, 1.0)
    Image.fromarray(np.round(data * 255.0).astype(np.uint8)).save(path)


def list_images(directory: str | Path) -> list[Path]:
    """Image files in a directory, sorted by filename."""
    root = Path(directory)
    return sorted(p for p in root.iterdir() if p.is_file() and p.suffix.lower() in IMAGE_EXTENSIONS)
