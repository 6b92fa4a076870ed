"""Regression models: linear baselines and boosted trees."""

from __future__ import annotations

import json
import os

import numpy as np

from ..errors import FormatError, ParameterError, SchemaError
from ..records import FeatureTable
from .gbdt import (
    PRESETS,
    GbdtModel,
    GbdtParams,
    feature_importance,
    gbdt_fit,
    preset,
    schema_hash,
    select_top_n,
)
from .linear import LinearModel, ols_fit, ridge_fit

LINEAR_FORMAT_VERSION = 1

__all__ = [
    "PRESETS", "GbdtModel", "GbdtParams", "LinearModel", "feature_importance", "fit_model",
    "gbdt_fit", "load_model", "ols_fit", "predict", "preset", "ridge_fit", "save_model",
    "schema_hash", "select_top_n",
]


def predict(model, data) -> np.ndarray:
    """Predict from a FeatureTable (columns matched by name) or a raw matrix."""
    if isinstance(data, FeatureTable):
        absent = [n for n in model.feature_names if not data.has_column(n)]
        if absent:
            raise SchemaError(f"table lacks model features: {absent}")
        data = data.select(model.feature_names)
    return model.predict(data)


def fit_model(spec: str, X, y, feature_names, seed: int = 0, ridge_alpha: float = 1.0):
    """Fit by identifier: ``ols``, ``ridge`` or ``gbdt:<preset>``."""
    if spec == "ols":
        return ols_fit(X, y, feature_names)
    if spec == "ridge":
        return ridge_fit(X, y, ridge_alpha, feature_names)
    if spec.startswith("gbdt:"):
        return gbdt_fit(X, y, preset(spec.split(":", 1)[1], seed=seed), feature_names)
    raise ParameterError(f"unknown model {spec!r}; use ols, ridge or gbdt:<preset>")


def save_model(model, path: str | os.PathLike, metadata: dict | None = None) -> None:
    if metadata:
        model.metadata.update(metadata)
    if isinstance(model, GbdtModel):
        model.save(path)
        return
    d = model.to_dict()
    d.update(format_version=LINEAR_FORMAT_VERSION, schema_hash=schema_hash(model.feature_names))
    with open(path, "w") as fh:
        json.dump(d, fh, sort_keys=True)
        fh.write("\n")


def load_model(path: str | os.PathLike):
    with open(path) as fh:
        d = json.load(fh)
    kind = d.get("kind")
    if kind == "gbdt":
        return GbdtModel.from_dict(d)
    if kind in ("ols", "ridge"):
        if d.get("format_version") != LINEAR_FORMAT_VERSION:
            raise FormatError(f"{path}: unsupported linear model version")
        return LinearModel.from_dict(d)
    raise FormatError(f"{path}: unknown model kind {kind!r}")
