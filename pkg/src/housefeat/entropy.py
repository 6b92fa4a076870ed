"""Local Shannon entropy maps, regional averages and entropy center of gravity."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np

from .errors import DomainError, ParameterError
from .records import ImageAsset

REGION_NAMES = ("tl", "tc", "tr", "ml", "c", "mr", "bl", "bc", "br")
N_LEVELS = 256


def shannon_entropy(probabilities) -> float:
    """Entropy in bits of a discrete distribution; ``0 * log 0`` counts as 0."""
    p = np.asarray(probabilities, dtype=np.float64).ravel()
    if p.size == 0:
        raise DomainError("empty distribution")
    if np.any(p < 0):
        raise DomainError("negative probability")
    if abs(p.sum() - 1.0) > 1e-9:
        raise DomainError(f"probabilities sum to {p.sum()!r}, not 1")
    nz = p[p > 0]
    return float(-np.sum(nz * np.log2(nz)))


def to_grayscale(rgb) -> np.ndarray:
    """ITU-R 601 luma, rounded half up to uint8."""
    rgb = np.asarray(rgb)
    if rgb.ndim == 2:
        gray = rgb.astype(np.float64)
    elif rgb.ndim == 3 and rgb.shape[2] in (3, 4):
        c = rgb[..., :3].astype(np.float64)
        gray = 0.299 * c[..., 0] + 0.587 * c[..., 1] + 0.114 * c[..., 2]
    else:
        raise DomainError(f"expected an RGB image, got shape {rgb.shape}")
    if gray.shape[0] == 0 or gray.shape[1] == 0:
        raise DomainError("zero-dimension image")
    return np.clip(np.floor(gray + 0.5), 0, 255).astype(np.uint8)


@numba.njit(cache=True)
def _entropy_kernel(padded, h, w, window, table):
    # ``occ[c]`` is the number of intensity levels seen exactly c times in the
    # window, so the sum below never depends on which levels are present.
    n = window * window
    out = np.empty((h, w))
    hist = np.zeros(256, np.int64)
    occ = np.zeros(n + 1, np.int64)
    for i in range(h):
        hist[:] = 0
        occ[:] = 0
        for di in range(window):
            for dj in range(window):
                hist[padded[i + di, dj]] += 1
        for v in range(256):
            occ[hist[v]] += 1
        for j in range(w):
            if j > 0:
                for di in range(window):
                    a = padded[i + di, j - 1]
                    occ[hist[a]] -= 1
                    hist[a] -= 1
                    occ[hist[a]] += 1
                    b = padded[i + di, j + window - 1]
                    occ[hist[b]] -= 1
                    hist[b] += 1
                    occ[hist[b]] += 1
            s = 0.0
            for c in range(1, n + 1):
                if occ[c]:
                    s += occ[c] * table[c]
            out[i, j] = s
    return out


def local_entropy_map(gray, window: int = 9) -> np.ndarray:
    """Per-pixel entropy (bits) of the intensity histogram in a square window.

    The image is extended by edge replication, so every window holds
    ``window**2`` samples and the map has the source shape.
    """
    if window < 3 or window % 2 == 0:
        raise ParameterError(f"window must be odd and >= 3, got {window}")
    gray = np.asarray(gray)
    if gray.ndim != 2 or gray.size == 0:
        raise DomainError(f"expected a nonempty 2-D grayscale image, got shape {gray.shape}")
    if gray.dtype != np.uint8:
        if gray.min() < 0 or gray.max() > 255:
            raise DomainError("grayscale intensities must lie in [0, 255]")
        gray = gray.astype(np.uint8)
    r = window // 2
    n = window * window
    counts = np.arange(n + 1, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        table = np.where(counts > 0, -(counts / n) * np.log2(counts / n), 0.0)
    padded = np.pad(gray, r, mode="edge")
    return _entropy_kernel(padded, gray.shape[0], gray.shape[1], window, table)


def global_avg_entropy(emap) -> float:
    emap = np.asarray(emap, dtype=np.float64)
    if emap.size == 0:
        raise DomainError("empty entropy map")
    return float(emap.mean())


def region_bounds(size: int, grid: int = 3) -> list[tuple[int, int]]:
    return [((i * size) // grid, ((i + 1) * size) // grid) for i in range(grid)]


def regional_avg_entropy(emap, grid: int = 3) -> dict[str, float]:
    """Mean entropy over a ``grid x grid`` partition of the map.

    For the default 3x3 grid the keys are ``tl, tc, tr, ml, c, mr, bl, bc,
    br``; other grids use ``r<i>c<j>``.
    """
    emap = np.asarray(emap, dtype=np.float64)
    h, w = emap.shape
    if h < grid or w < grid:
        raise DomainError(f"map {w}x{h} is smaller than the {grid}x{grid} region grid")
    out = {}
    for i, (r0, r1) in enumerate(region_bounds(h, grid)):
        for j, (c0, c1) in enumerate(region_bounds(w, grid)):
            key = REGION_NAMES[i * 3 + j] if grid == 3 else f"r{i}c{j}"
            out[key] = float(emap[r0:r1, c0:c1].mean())
    return out


@dataclass(frozen=True)
class CenterOfGravity:
    x: float
    y: float
    distance_raw: float
    distance_norm: float
    degenerate: bool = False


def center_of_gravity(emap) -> CenterOfGravity:
    """Entropy-weighted centroid with zero-based pixel coordinates.

    ``distance_norm`` divides the distance to the image center by the
    center-to-corner distance. An all-zero map yields the exact center,
    flagged ``degenerate``.
    """
    emap = np.asarray(emap, dtype=np.float64)
    if emap.ndim != 2 or emap.size == 0:
        raise DomainError("expected a nonempty 2-D map")
    h, w = emap.shape
    cx, cy = (w - 1) / 2.0, (h - 1) / 2.0
    col = emap.sum(axis=0)
    row = emap.sum(axis=1)
    total = col.sum()
    if total <= 0:
        return CenterOfGravity(cx, cy, 0.0, 0.0, degenerate=True)
    x = float(np.clip(np.dot(col, np.arange(w)) / total, 0, w - 1))
    y = float(np.clip(np.dot(row, np.arange(h)) / total, 0, h - 1))
    raw = math.hypot(x - cx, y - cy)
    corner = math.hypot(cx, cy)
    norm = min(raw / corner, 1.0) if corner > 0 else 0.0
    return CenterOfGravity(x, y, raw, norm)


def feature_prefix(asset: ImageAsset) -> tuple[str, str]:
    """``(type code, name suffix)``; satellite features carry the zoom level."""
    suffix = f"_z{asset.zoom}" if asset.image_type == "satellite" else ""
    return asset.type_code, suffix


def entropy_feature_names(image_type: str, zoom: int | None = None, grid: int = 3) -> list[str]:
    code = {"indoor": "ind", "outdoor": "out", "satellite": "sat"}[image_type]
    suffix = f"_z{zoom}" if image_type == "satellite" else ""
    regions = REGION_NAMES if grid == 3 else [f"r{i}c{j}" for i in range(grid) for j in range(grid)]
    names = [f"ENT_{code}_avg{suffix}"]
    names += [f"ENT_{code}_{r}{suffix}" for r in regions]
    names += [f"CG_{code}_{p}{suffix}" for p in ("x", "y", "dist")]
    return names


def entropy_features(asset: ImageAsset, image, window: int = 9, grid: int = 3) -> dict[str, float]:
    """Global and regional entropy plus CG for one image.

    ``image`` may be RGB or already grayscale.
    """
    code, suffix = feature_prefix(asset)
    emap = local_entropy_map(to_grayscale(image), window)
    feats = {f"ENT_{code}_avg{suffix}": global_avg_entropy(emap)}
    for region, value in regional_avg_entropy(emap, grid).items():
        feats[f"ENT_{code}_{region}{suffix}"] = value
    cg = center_of_gravity(emap)
    feats[f"CG_{code}_x{suffix}"] = cg.x
    feats[f"CG_{code}_y{suffix}"] = cg.y
    feats[f"CG_{code}_dist{suffix}"] = cg.distance_norm
    return feats


def entropy_to_png_array(emap, window: int = 9) -> np.ndarray:
    """Scale a map to uint8 by its theoretical maximum, for debug dumps."""
    top = math.log2(min(N_LEVELS, window * window))
    return np.clip(np.floor(np.asarray(emap) / top * 255 + 0.5), 0, 255).astype(np.uint8)
