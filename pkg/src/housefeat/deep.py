"""Embedding ingestion, PCA reduction and per-category averaging."""

from __future__ import annotations

import csv
import json
import math
import os
import warnings
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .color import rgb_to_hsv_array
from .entropy import to_grayscale
from .errors import DomainError, FormatError
from .records import CATEGORIES, MISSING, ImageAsset

PCA_FORMAT_VERSION = 1
TOY_DIM = 96
DEFAULT_PCA_BUDGET = 200


@dataclass(frozen=True)
class EmbeddingRecord:
    image_id: str
    vector: np.ndarray


def load_embeddings(path: str | os.PathLike) -> dict[str, EmbeddingRecord]:
    """Read ``image_id,v1,...,vD`` rows; an optional first line ``dim=D``."""
    records: dict[str, EmbeddingRecord] = {}
    declared = None
    dim = None
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row:
                continue
            if lineno == 1 and row[0].startswith("dim="):
                declared = int(row[0][4:])
                continue
            image_id, cells = row[0], row[1:]
            try:
                vec = np.array([float(c) for c in cells])
            except ValueError:
                raise FormatError(f"{path}:{lineno}: non-numeric embedding value") from None
            if vec.size == 0 or not np.all(np.isfinite(vec)):
                raise FormatError(f"{path}:{lineno}: empty or non-finite embedding")
            if dim is None:
                dim = vec.size
            elif vec.size != dim:
                raise FormatError(f"{path}:{lineno}: dimension {vec.size} differs from {dim}")
            if image_id in records:
                raise FormatError(f"{path}:{lineno}: duplicate image_id {image_id!r}")
            records[image_id] = EmbeddingRecord(image_id, vec)
    if not records:
        raise FormatError(f"{path}: no embeddings")
    if declared is not None and declared != dim:
        raise FormatError(f"{path}: header declares dim={declared}, rows have {dim}")
    return records


def write_embeddings(records: Iterable[EmbeddingRecord], path: str | os.PathLike) -> None:
    records = list(records)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        if records:
            writer.writerow([f"dim={records[0].vector.size}"])
        for rec in records:
            writer.writerow([rec.image_id] + [repr(float(v)) for v in rec.vector])


def join_embeddings(
    assets: Iterable[ImageAsset], records: Mapping[str, EmbeddingRecord]
) -> dict[str, EmbeddingRecord]:
    """Keep embeddings whose image_id appears in the manifest; warn about the rest."""
    ids = {a.image_id for a in assets}
    unknown = sorted(set(records) - ids)
    if unknown:
        warnings.warn(f"{len(unknown)} embeddings have no manifest entry, dropped (e.g. {unknown[0]!r})",
                      stacklevel=2)
    return {k: v for k, v in records.items() if k in ids}


def _bounds(size: int, parts: int) -> list[tuple[int, int]]:
    out = []
    for i in range(parts):
        lo = (i * size) // parts
        hi = max(((i + 1) * size) // parts, lo + 1)
        out.append((min(lo, size - 1), min(hi, size)))
    return out


def toy_embed(image, image_id: str = "") -> EmbeddingRecord:
    """Deterministic 96-d stand-in for a CNN embedding.

    64 mean block intensities on an 8x8 grid (scaled to [0, 1]) followed by
    a normalized 32-bin hue histogram. Achromatic pixels have hue 0 and land
    in the first bin.
    """
    image = np.asarray(image)
    if image.ndim != 3 or image.shape[0] == 0 or image.shape[1] == 0:
        raise DomainError(f"expected a decoded RGB image, got shape {image.shape}")
    gray = to_grayscale(image).astype(np.float64)
    h, w = gray.shape
    blocks = [
        gray[r0:r1, c0:c1].mean() / 255.0
        for r0, r1 in _bounds(h, 8)
        for c0, c1 in _bounds(w, 8)
    ]
    hue = rgb_to_hsv_array(image)[..., 0].ravel()
    hist = np.bincount(np.minimum((hue / 360.0 * 32).astype(np.int64), 31), minlength=32)
    vec = np.concatenate([np.array(blocks), hist / hue.size])
    return EmbeddingRecord(image_id, vec)


# -- PCA -----------------------------------------------------------------


@dataclass(frozen=True)
class PcaModel:
    mean: np.ndarray
    components: np.ndarray  # (n_components, D), orthonormal rows
    explained_ratio: np.ndarray

    @property
    def n_components(self) -> int:
        return self.components.shape[0]

    def to_dict(self) -> dict:
        return {
            "format_version": PCA_FORMAT_VERSION,
            "mean": self.mean.tolist(),
            "components": self.components.tolist(),
            "explained_ratio": self.explained_ratio.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PcaModel":
        if data.get("format_version") != PCA_FORMAT_VERSION:
            raise FormatError(f"unsupported PCA model version {data.get('format_version')!r}")
        comps = np.array(data["components"], dtype=np.float64)
        mean = np.array(data["mean"], dtype=np.float64)
        return cls(mean, comps.reshape(-1, mean.size), np.array(data["explained_ratio"], dtype=np.float64))

    def save(self, path: str | os.PathLike) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path: str | os.PathLike) -> "PcaModel":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def pca_budget(n: int, dim: int, budget: int = DEFAULT_PCA_BUDGET) -> int:
    return max(1, min(budget, n - 1, dim))


def pca_fit(matrix, n_components: int | None = None, variance: float | None = None) -> PcaModel:
    """Principal components from the covariance eigendecomposition.

    Give either a component count or a cumulative variance fraction; with
    neither the count defaults to ``min(200, n - 1, D)``. Each component is
    signed so its largest-magnitude coordinate is positive.
    """
    X = np.asarray(matrix, dtype=np.float64)
    if X.ndim != 2:
        raise DomainError("expected a 2-D matrix")
    n, dim = X.shape
    if n < 2:
        raise DomainError(f"PCA needs at least 2 rows, got {n}")
    limit = min(n - 1, dim)
    mean = X.mean(axis=0)
    Xc = X - mean
    cov = Xc.T @ Xc / (n - 1)
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals)[::-1]
    evals = np.clip(evals[order], 0.0, None)
    evecs = evecs[:, order].T
    total = evals.sum()
    ratios = evals / total if total > 0 else np.zeros_like(evals)

    if n_components is not None and variance is not None:
        raise DomainError("give n_components or variance, not both")
    if variance is not None:
        if not 0 < variance <= 1:
            raise DomainError(f"variance fraction must be in (0, 1], got {variance}")
        cum = np.cumsum(ratios)
        k = int(np.searchsorted(cum, variance - 1e-12) + 1)
        k = min(k, limit)
    elif n_components is not None:
        if not 1 <= n_components <= limit:
            raise DomainError(f"n_components must be in [1, {limit}], got {n_components}")
        k = n_components
    else:
        k = pca_budget(n, dim)

    comps = evecs[:k].copy()
    pivots = np.argmax(np.abs(comps), axis=1)
    signs = np.sign(comps[np.arange(k), pivots])
    signs[signs == 0] = 1.0
    comps *= signs[:, None]
    return PcaModel(mean, comps, ratios[:k].copy())


def pca_transform(model: PcaModel, vectors) -> np.ndarray:
    """Scores ``components @ (v - mean)`` for one vector or a batch of rows."""
    v = np.asarray(vectors, dtype=np.float64)
    if v.shape[-1] != model.mean.size:
        raise DomainError(f"vector length {v.shape[-1]} does not match model dimension {model.mean.size}")
    return (v - model.mean) @ model.components.T


def pca_inverse(model: PcaModel, scores) -> np.ndarray:
    return np.asarray(scores) @ model.components + model.mean


# -- per-listing features -------------------------------------------------


def category_counts(assets: Iterable[ImageAsset]) -> dict[str, int]:
    counts = {f"cat_{c}": 0 for c in CATEGORIES}
    for a in assets:
        if a.image_type == "indoor" and a.category in CATEGORIES:
            counts[f"cat_{a.category}"] += 1
    return counts


def category_average(
    assets: Iterable[ImageAsset],
    embeddings: Mapping[str, EmbeddingRecord],
    model: PcaModel,
    category: str,
):
    """Mean PCA scores of the listing's images in ``category``, or MISSING."""
    if category not in CATEGORIES:
        raise DomainError(f"unknown category {category!r}")
    vecs = [
        embeddings[a.image_id].vector
        for a in assets
        if a.image_type == "indoor" and a.category == category and a.image_id in embeddings
    ]
    if not vecs:
        return MISSING
    scores = pca_transform(model, np.vstack(vecs))
    # fsum per component keeps the mean independent of image order
    return np.array([math.fsum(col) for col in scores.T]) / len(vecs)


def pca_feature_names(n_keep: int = 2) -> list[str]:
    return [f"pca_{c}_{j}" for c in CATEGORIES for j in range(1, n_keep + 1)]


def listing_deep_features(
    assets: Sequence[ImageAsset],
    embeddings: Mapping[str, EmbeddingRecord],
    models: PcaModel | Mapping[str, PcaModel] | None,
    n_keep: int = 2,
) -> dict:
    """``cat_<category>`` counts and the first ``n_keep`` averaged scores per category.

    ``models`` is one pooled model or a mapping category -> model.
    """
    feats: dict = dict(category_counts(assets))
    for cat in CATEGORIES:
        model = models.get(cat) if isinstance(models, Mapping) else models
        avg = MISSING if model is None else category_average(assets, embeddings, model, cat)
        for j in range(1, n_keep + 1):
            if avg is MISSING or j > avg.size:
                feats[f"pca_{cat}_{j}"] = MISSING
            else:
                feats[f"pca_{cat}_{j}"] = float(avg[j - 1])
    return feats


def fit_category_models(
    assets: Iterable[ImageAsset],
    embeddings: Mapping[str, EmbeddingRecord],
    budget: int = DEFAULT_PCA_BUDGET,
    variance: float | None = None,
    per_category: bool = False,
) -> PcaModel | dict[str, PcaModel] | None:
    """Fit PCA on indoor embeddings, pooled or separately per category.

    Returns None (or omits a category) when fewer than two embeddings exist.
    """
    by_cat: dict[str, list[np.ndarray]] = {c: [] for c in CATEGORIES}
    for a in sorted(assets, key=lambda a: a.image_id):
        if a.image_type == "indoor" and a.category in CATEGORIES and a.image_id in embeddings:
            by_cat[a.category].append(embeddings[a.image_id].vector)

    def fit(rows):
        if len(rows) < 2:
            return None
        X = np.vstack(rows)
        if variance is not None:
            return pca_fit(X, variance=variance)
        return pca_fit(X, n_components=pca_budget(len(X), X.shape[1], budget))

    if per_category:
        models = {c: fit(rows) for c, rows in by_cat.items()}
        return {c: m for c, m in models.items() if m is not None}
    return fit([v for c in CATEGORIES for v in by_cat[c]])
