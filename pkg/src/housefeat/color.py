"""HSV conversion, k-means palettes and green-mask segmentation."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import ParameterError, DomainError
from .records import MISSING, ImageAsset, exact_mean


@dataclass(frozen=True)
class HsvPixel:
    hue: float
    saturation: float
    value: float


def rgb_to_hsv(pixel) -> HsvPixel:
    """Hexcone conversion of one 8-bit RGB triple; hue in degrees."""
    h, s, v = rgb_to_hsv_array(np.asarray(pixel, dtype=np.float64).reshape(1, 3))[0]
    return HsvPixel(float(h), float(s), float(v))


def rgb_to_hsv_array(rgb) -> np.ndarray:
    """Vectorized hexcone conversion; last axis RGB in [0, 255] -> (h deg, s, v)."""
    c = np.asarray(rgb, dtype=np.float64)[..., :3] / 255.0
    r, g, b = c[..., 0], c[..., 1], c[..., 2]
    mx = c.max(axis=-1)
    mn = c.min(axis=-1)
    delta = mx - mn
    safe = np.where(delta > 0, delta, 1.0)
    hue = np.where(
        mx == r, ((g - b) / safe) % 6.0,
        np.where(mx == g, (b - r) / safe + 2.0, (r - g) / safe + 4.0),
    )
    hue = np.where(delta > 0, hue * 60.0, 0.0)
    hue = np.where(hue >= 360.0, hue - 360.0, hue)
    sat = np.where(mx > 0, delta / np.where(mx > 0, mx, 1.0), 0.0)
    return np.stack([hue, sat, mx], axis=-1)


# -- masks ---------------------------------------------------------------


@dataclass(frozen=True)
class HsvRange:
    hue_lo: float
    hue_hi: float
    sat_min: float = 0.0
    val_min: float = 0.0

    def __post_init__(self):
        if not (0 <= self.hue_lo <= 360 and 0 <= self.hue_hi <= 360):
            raise ParameterError(f"hue interval [{self.hue_lo}, {self.hue_hi}] outside [0, 360]")
        if not (0 <= self.sat_min <= 1 and 0 <= self.val_min <= 1):
            raise ParameterError("saturation/value thresholds must lie in [0, 1]")

    def contains(self, hsv: np.ndarray) -> np.ndarray:
        h, s, v = hsv[..., 0], hsv[..., 1], hsv[..., 2]
        if self.hue_lo <= self.hue_hi:
            in_hue = (h >= self.hue_lo) & (h <= self.hue_hi)
        else:  # wraps through 0
            in_hue = (h >= self.hue_lo) | (h <= self.hue_hi)
        return in_hue & (s >= self.sat_min) & (v >= self.val_min)


@dataclass(frozen=True)
class GreenMaskSpec:
    ranges: tuple[HsvRange, ...]

    def __post_init__(self):
        object.__setattr__(self, "ranges", tuple(self.ranges))

    def to_dict(self) -> dict:
        rows = [[r.hue_lo, r.hue_hi, r.sat_min, r.val_min] for r in self.ranges]
        return {"ranges": [[float(v) for v in row] for row in rows]}

    @classmethod
    def from_dict(cls, data: dict) -> "GreenMaskSpec":
        return cls(tuple(HsvRange(*map(float, r)) for r in data["ranges"]))


DEFAULT_GREEN_SPEC = GreenMaskSpec((HsvRange(60.0, 170.0, 0.2, 0.15),))


def green_mask(image, spec: GreenMaskSpec = DEFAULT_GREEN_SPEC) -> np.ndarray:
    if not spec.ranges:
        raise ParameterError("green mask spec has no ranges")
    hsv = rgb_to_hsv_array(image)
    mask = np.zeros(hsv.shape[:-1], dtype=bool)
    for r in spec.ranges:
        mask |= r.contains(hsv)
    return mask


def green_fraction(image, spec: GreenMaskSpec = DEFAULT_GREEN_SPEC) -> float:
    """Fraction of pixels falling inside any of the spec's HSV ranges."""
    image = np.asarray(image)
    if image.size == 0:
        raise DomainError("empty image")
    mask = green_mask(image, spec)
    return int(mask.sum()) / mask.size


def apply_mask(image, spec: GreenMaskSpec = DEFAULT_GREEN_SPEC) -> np.ndarray:
    """Copy of ``image`` with every pixel outside the mask set to black."""
    image = np.asarray(image)
    out = np.zeros_like(image)
    mask = green_mask(image, spec)
    out[mask] = image[mask]
    return out


# -- k-means palettes ----------------------------------------------------


def embed_hsv(hsv) -> np.ndarray:
    """Planar embedding ``(s cos h, s sin h, v)`` that removes the hue seam."""
    hsv = np.asarray(hsv, dtype=np.float64).reshape(-1, 3)
    rad = np.deg2rad(hsv[:, 0])
    return np.column_stack([hsv[:, 1] * np.cos(rad), hsv[:, 1] * np.sin(rad), hsv[:, 2]])


def unembed_hsv(points) -> np.ndarray:
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    sat = np.hypot(points[:, 0], points[:, 1])
    hue = np.where(sat > 0, np.rad2deg(np.arctan2(points[:, 1], points[:, 0])) % 360.0, 0.0)
    hue = np.where(hue >= 360.0, 0.0, hue)
    return np.column_stack([hue, np.clip(sat, 0, 1), np.clip(points[:, 2], 0, 1)])


def kmeans_plusplus(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """k-means++ seeding: first center uniform, the rest by squared distance."""
    n = len(points)
    centers = np.empty((k, points.shape[1]))
    centers[0] = points[rng.integers(n)]
    d2 = ((points - centers[0]) ** 2).sum(axis=1)
    for i in range(1, k):
        total = d2.sum()
        if total > 0:
            idx = int(rng.choice(n, p=d2 / total))
        else:
            idx = int(rng.integers(n))
        centers[i] = points[idx]
        d2 = np.minimum(d2, ((points - centers[i]) ** 2).sum(axis=1))
    return centers


def _assign(points, centers):
    d2 = ((points[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    labels = d2.argmin(axis=1)
    return labels, float(d2[np.arange(len(points)), labels].sum())


def lloyd(points, centers, max_iter: int = 100, tol: float = 1e-6):
    """Lloyd iterations from given centers.

    Returns ``(centers, labels, sse_history)``; ``sse_history[t]`` is the
    within-cluster SSE after the t-th assignment step. Empty clusters keep
    their previous center.
    """
    centers = np.array(centers, dtype=np.float64)
    history = []
    labels, sse = _assign(points, centers)
    history.append(sse)
    for _ in range(max_iter):
        new = centers.copy()
        for j in range(len(centers)):
            members = points[labels == j]
            if len(members):
                new[j] = members.mean(axis=0)
        shift = float(np.sqrt(((new - centers) ** 2).sum(axis=1)).max())
        centers = new
        labels, sse = _assign(points, centers)
        history.append(sse)
        if shift < tol:
            break
    return centers, labels, history


@dataclass(frozen=True)
class ColorPalette:
    """k dominant colors sorted by descending cluster population."""

    centroids: np.ndarray  # (k, 3) HSV
    counts: np.ndarray
    seed: int
    sse_history: tuple[float, ...] = field(default=(), compare=False)

    @property
    def sse(self) -> float:
        return self.sse_history[-1]


def kmeans_palette(hsv_pixels, k: int, seed: int, max_iter: int = 100, tol: float = 1e-6) -> ColorPalette:
    hsv_pixels = np.asarray(hsv_pixels, dtype=np.float64).reshape(-1, 3)
    if k < 1:
        raise ParameterError(f"k must be >= 1, got {k}")
    if len(hsv_pixels) < k:
        raise ParameterError(f"k={k} exceeds the sample size {len(hsv_pixels)}")
    points = embed_hsv(hsv_pixels)
    rng = np.random.default_rng(seed)
    centers, labels, history = lloyd(points, kmeans_plusplus(points, k, rng), max_iter, tol)
    counts = np.bincount(labels, minlength=k)
    order = np.argsort(-counts, kind="stable")
    return ColorPalette(unembed_hsv(centers[order]), counts[order], seed, tuple(history))


def subsample_pixels(image, max_pixels: int = 20_000) -> np.ndarray:
    """Flattened pixels taken at a fixed stride so at most ``max_pixels`` remain."""
    flat = np.asarray(image).reshape(-1, np.asarray(image).shape[-1])
    stride = max(1, math.ceil(len(flat) / max_pixels))
    return flat[::stride]


def image_palette(image, k: int = 8, seed: int = 0, max_pixels: int = 20_000) -> ColorPalette:
    pixels = subsample_pixels(image, max_pixels)
    return kmeans_palette(rgb_to_hsv_array(pixels), min(k, len(pixels)), seed)


def _union(intervals: list[tuple[float, float]]) -> list[tuple[float, float]]:
    merged: list[list[float]] = []
    for lo, hi in sorted(intervals):
        if merged and lo <= merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], hi)
        else:
            merged.append([lo, hi])
    return [tuple(m) for m in merged]


def derive_masks(
    palettes: Iterable[ColorPalette],
    band: tuple[float, float] = (60.0, 170.0),
    margin: float = 20.0,
    min_saturation: float = 0.2,
    min_value: float = 0.15,
    default: GreenMaskSpec = DEFAULT_GREEN_SPEC,
) -> GreenMaskSpec:
    """Green mask built from the green-band centroids of corpus palettes.

    Each centroid hue becomes ``[hue - margin, hue + margin]``; overlapping
    intervals are merged. Centroids too desaturated or dark to carry a
    meaningful hue are ignored.
    """
    palettes = list(palettes)
    if not palettes:
        raise ParameterError("no palettes given")
    intervals = []
    for pal in palettes:
        for hue, sat, val in np.asarray(pal.centroids):
            if band[0] <= hue <= band[1] and sat >= min_saturation and val >= min_value:
                intervals.append((max(0.0, hue - margin), min(360.0, hue + margin)))
    if not intervals:
        warnings.warn("no green centroids in the corpus palettes; using the default mask", stacklevel=2)
        return default
    return GreenMaskSpec(tuple(HsvRange(lo, hi, min_saturation, min_value) for lo, hi in _union(intervals)))


def listing_greenness(scored: Sequence[tuple[ImageAsset, float]], zoom: int = 20) -> dict:
    """``GREEN_mask`` and ``GREEN_sat`` from per-image green fractions.

    ``GREEN_mask`` averages the outdoor images, ``GREEN_sat`` the satellite
    images at ``zoom``; either is MISSING when no such image exists.
    """
    outdoor = [f for a, f in scored if a.image_type == "outdoor"]
    sat = [f for a, f in scored if a.image_type == "satellite" and a.zoom == zoom]
    return {
        "GREEN_mask": exact_mean(outdoor) if outdoor else MISSING,
        "GREEN_sat": exact_mean(sat) if sat else MISSING,
    }
