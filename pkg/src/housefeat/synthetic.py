"""Procedural listing corpus with a known dependence on image content.

log price depends on living area, a ZIP effect, outdoor greenness and a
latent kitchen style that brightens kitchen photos. Days on market follow a
skewed, thresholded function of the same latents so tree models have an
edge over linear ones.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from matplotlib.colors import hsv_to_rgb

from .imageio import save_png
from .records import ImageAsset, ListingRecord, write_listings, write_manifest

ZIP_EFFECTS = np.array([-0.30, -0.21, -0.13, -0.04, 0.04, 0.13, 0.21, 0.30])
ROOM_COUNTS = {"kitchen": (1, 3), "bed": (1, 3), "bath": (1, 2), "living": (0, 2),
               "basement": (0, 1), "dinning": (0, 1)}


@dataclass
class SyntheticCorpus:
    root: Path
    listings: list[ListingRecord]
    assets: list[ImageAsset]
    greenness: np.ndarray
    style: np.ndarray

    @property
    def metadata_path(self) -> Path:
        return self.root / "metadata.csv"

    @property
    def manifest_path(self) -> Path:
        return self.root / "manifest.csv"

    @property
    def image_root(self) -> Path:
        return self.root / "images"


def _field(rng, size, cells=8):
    """Blocky low-frequency noise plus fine noise, shape (size, size)."""
    coarse = rng.random((cells, cells))
    rep = -(-size // cells)
    f = np.kron(coarse, np.ones((rep, rep)))[:size, :size]
    return f + 0.35 * rng.random((size, size))


def _hsv_image(h, s, v) -> np.ndarray:
    rgb = hsv_to_rgb(np.stack([np.asarray(h) / 360.0, s, v], axis=-1))
    return np.clip(np.floor(rgb * 255 + 0.5), 0, 255).astype(np.uint8)


def green_scene(rng, size: int, fraction: float) -> np.ndarray:
    """Scene whose share of vegetation-colored pixels is ``fraction``."""
    field_ = _field(rng, size)
    cut = np.quantile(field_, np.clip(fraction, 0, 1))
    green = field_ < cut if fraction < 1 else np.ones_like(field_, bool)
    n = size * size
    h = np.where(green, rng.uniform(85, 140, n).reshape(size, size), 0.0)
    s = np.where(green, rng.uniform(0.4, 0.9, n).reshape(size, size), 0.0)
    v = np.where(green, rng.uniform(0.3, 0.8, n).reshape(size, size), 0.0)
    # non-vegetation: gray pavement, brown roofs, blue sky
    kind = rng.integers(0, 3, (size, size))
    gray = ~green & (kind == 0)
    brown = ~green & (kind == 1)
    blue = ~green & (kind == 2)
    v = np.where(gray, rng.uniform(0.3, 0.9, (size, size)), v)
    s = np.where(gray, rng.uniform(0.0, 0.08, (size, size)), s)
    h = np.where(brown, rng.uniform(15, 40, (size, size)), h)
    s = np.where(brown, rng.uniform(0.3, 0.6, (size, size)), s)
    v = np.where(brown, rng.uniform(0.3, 0.7, (size, size)), v)
    h = np.where(blue, rng.uniform(200, 225, (size, size)), h)
    s = np.where(blue, rng.uniform(0.3, 0.7, (size, size)), s)
    v = np.where(blue, rng.uniform(0.6, 0.95, (size, size)), v)
    return _hsv_image(h, s, v)


def room_image(rng, size: int, brightness: float, texture: float) -> np.ndarray:
    """Indoor-like frame: a lit gradient, furniture blocks and texture noise."""
    yy, xx = np.mgrid[0:size, 0:size] / max(size - 1, 1)
    base = brightness + 0.15 * (xx - 0.5) + texture * (_field(rng, size, 4) - 0.7)
    v = np.clip(base, 0.02, 0.98)
    h = np.full((size, size), rng.uniform(20, 50))
    s = np.clip(0.15 + 0.1 * rng.random((size, size)), 0, 1)
    return _hsv_image(h, s, v)


def make_corpus(root, n_listings: int = 500, seed: int = 0, image_size: int = 64) -> SyntheticCorpus:
    """Write ``metadata.csv``, ``manifest.csv`` and ``images/`` under ``root``."""
    root = Path(root)
    (root / "images").mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    n = n_listings
    zip_idx = rng.integers(0, len(ZIP_EFFECTS), n)
    sqft = np.round(np.exp(rng.normal(np.log(1800), 0.35, n)))
    beds = np.clip(np.round(sqft / 600 + rng.normal(0, 0.7, n)), 1, 6).astype(int)
    baths = np.clip(np.round(beds * 1.2 + rng.normal(0, 0.6, n)) / 2, 1, 4)
    lotsize = np.round(np.exp(rng.normal(np.log(5000), 0.6, n)))
    garage = (rng.random(n) < 0.5).astype(int)
    age = rng.integers(0, 121, n)
    green = rng.uniform(0.05, 0.85, n)
    style = rng.normal(0, 1, n)

    log_price = (
        12.5 + 0.7 * np.log(sqft / 1800) + ZIP_EFFECTS[zip_idx] + 0.02 * (beds - 3)
        + 0.05 * garage - 0.001 * age + 0.9 * (green - 0.45) + 0.12 * style
        + rng.normal(0, 0.06, n)
    )
    log_dom = (
        2.6 + 1.0 * (age > 80) + 0.8 * np.isin(zip_idx, (2, 5)) + 1.2 * (green < 0.25)
        - 0.6 * np.maximum(style, 0) + 0.9 * ((sqft > 2300) & (age < 30))
        + rng.normal(0, 0.3, n)
    )
    dom = np.maximum(np.round(np.expm1(log_dom)), 0).astype(int)

    listings, assets = [], []
    for i in range(n):
        lid = f"L{i:05d}"
        listings.append(ListingRecord(
            lid, float(np.round(np.exp(log_price[i]))), int(dom[i]), f"021{zip_idx[i]:02d}",
            int(beds[i]), float(baths[i]), float(lotsize[i]), float(sqft[i]), int(garage[i]), int(age[i]),
        ))
        d = root / "images" / lid
        d.mkdir(exist_ok=True)

        def put(name, img, **kw):
            rel = f"{lid}/{name}.png"
            save_png(img, root / "images" / rel)
            assets.append(ImageAsset(lid, rel, **kw))

        for k in range(2):
            frac = np.clip(green[i] + rng.normal(0, 0.03), 0, 1)
            put(f"out{k}", green_scene(rng, image_size, frac), image_type="outdoor")
        for zoom, mix in ((16, 0.2), (18, 0.6), (20, 1.0)):
            hood = 0.45 - 0.5 * ZIP_EFFECTS[zip_idx[i]]
            frac = np.clip(mix * green[i] + (1 - mix) * hood + rng.normal(0, 0.03), 0, 1)
            put(f"sat_z{zoom}", green_scene(rng, image_size, frac), image_type="satellite", zoom=zoom)
        for cat, (lo, hi) in ROOM_COUNTS.items():
            for k in range(int(rng.integers(lo, hi + 1))):
                if cat == "kitchen":
                    bright = 0.5 + 0.18 * np.tanh(style[i]) + rng.normal(0, 0.02)
                else:
                    bright = rng.uniform(0.3, 0.7)
                put(f"{cat}{k}", room_image(rng, image_size, bright, rng.uniform(0.1, 0.4)),
                    image_type="indoor", category=cat)

    write_listings(listings, root / "metadata.csv")
    write_manifest(assets, root / "manifest.csv")
    return SyntheticCorpus(root, listings, assets, green, style)
