"""OLS and ridge baselines with column-mean imputation of missing cells."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import DomainError, ParameterError


@dataclass(frozen=True)
class LinearModel:
    feature_names: tuple[str, ...]
    intercept: float
    coef: np.ndarray
    kind: str  # "ols" or "ridge"
    alpha: float = 0.0
    impute: np.ndarray = field(default=None, repr=False)
    metadata: dict = field(default_factory=dict, compare=False, repr=False)

    def predict(self, X) -> np.ndarray:
        X = _impute(np.asarray(X, dtype=np.float64), self.impute)
        return self.intercept + X @ self.coef

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "alpha": self.alpha,
            "feature_names": list(self.feature_names),
            "intercept": self.intercept,
            "coef": self.coef.tolist(),
            "impute": self.impute.tolist(),
            "metadata": self.metadata,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LinearModel":
        return cls(
            tuple(d["feature_names"]), float(d["intercept"]), np.array(d["coef"], dtype=np.float64),
            d["kind"], float(d["alpha"]), np.array(d["impute"], dtype=np.float64),
            dict(d.get("metadata", {})),
        )


def _impute(X: np.ndarray, means: np.ndarray | None) -> np.ndarray:
    if means is None or not np.isnan(X).any():
        return X
    return np.where(np.isnan(X), means, X)


def _prepare(X, y, feature_names):
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    n, p = X.shape
    if n == 0:
        raise DomainError("cannot fit on zero rows")
    if y.shape != (n,):
        raise DomainError(f"target length {y.shape} does not match {n} rows")
    if feature_names is None:
        feature_names = [f"x{i}" for i in range(p)]
    if len(feature_names) != p:
        raise DomainError("feature_names length does not match column count")
    with np.errstate(invalid="ignore"):
        counts = (~np.isnan(X)).sum(axis=0)
        sums = np.where(np.isnan(X), 0.0, X).sum(axis=0)
    means = np.where(counts > 0, sums / np.maximum(counts, 1), 0.0)
    return _impute(X, means), y, tuple(feature_names), means


def ols_fit(X, y, feature_names=None) -> LinearModel:
    """Least squares with an unpenalized intercept.

    Rank-deficient designs get the minimum-norm coefficient vector (the
    intercept is excluded from the norm by centering first).
    """
    X, y, names, means = _prepare(X, y, feature_names)
    xm = X.mean(axis=0)
    ym = y.mean()
    coef, *_ = np.linalg.lstsq(X - xm, y - ym, rcond=None)
    return LinearModel(names, float(ym - xm @ coef), coef, "ols", 0.0, means)


def ridge_fit(X, y, alpha: float, feature_names=None) -> LinearModel:
    """Ridge on internally standardized features; coefficients are mapped back.

    Minimizes ``||y - b0 - Z w||^2 + alpha ||w||^2`` with ``Z`` the
    standardized design. Zero-variance columns get coefficient 0.
    """
    if alpha < 0:
        raise ParameterError(f"ridge penalty must be >= 0, got {alpha}")
    X, y, names, means = _prepare(X, y, feature_names)
    xm = X.mean(axis=0)
    sd = X.std(axis=0)
    sd = np.where(sd > 0, sd, 1.0)
    Z = (X - xm) / sd
    ym = y.mean()
    p = Z.shape[1]
    A = Z.T @ Z + alpha * np.eye(p)
    w = np.linalg.lstsq(A, Z.T @ (y - ym), rcond=None)[0]
    coef = w / sd
    return LinearModel(names, float(ym - xm @ coef), coef, "ridge", float(alpha), means)
