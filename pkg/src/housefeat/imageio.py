"""Raster decoding and debug dumps."""

from __future__ import annotations

import os

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import AssetError


def load_rgb(path: str | os.PathLike) -> np.ndarray:
    """Decode a PNG/JPEG into an ``(h, w, 3)`` uint8 array."""
    try:
        with Image.open(path) as im:
            return np.asarray(im.convert("RGB"), dtype=np.uint8)
    except (OSError, UnidentifiedImageError, ValueError) as exc:
        raise AssetError(f"cannot decode {path}: {exc}") from exc


def save_png(array, path: str | os.PathLike) -> None:
    Image.fromarray(np.asarray(array, dtype=np.uint8)).save(path, format="PNG")
