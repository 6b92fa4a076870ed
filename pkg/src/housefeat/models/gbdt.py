"""Least-squares gradient-boosted regression trees on quantile histograms.

Each stage fits a depth-bounded tree to the current residuals. Split
candidates are bin boundaries derived from per-feature quantiles; a split
sends ``x <= threshold`` left, and missing values follow a default
direction learned at that node.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from ..errors import DomainError, FormatError, ParameterError

GBDT_FORMAT_VERSION = 1


@dataclass(frozen=True)
class GbdtParams:
    n_trees: int = 500
    learning_rate: float = 0.05
    max_depth: int = 6
    min_samples_leaf: int = 20
    n_bins: int = 64
    subsample: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 0:
            raise ParameterError("n_trees must be >= 0")
        if not 0 < self.learning_rate <= 1:
            raise ParameterError("learning_rate must be in (0, 1]")
        if self.max_depth < 1:
            raise ParameterError("max_depth must be >= 1")
        if self.min_samples_leaf < 1:
            raise ParameterError("min_samples_leaf must be >= 1")
        if self.n_bins < 2:
            raise ParameterError("n_bins must be >= 2")
        if not 0 < self.subsample <= 1:
            raise ParameterError("subsample must be in (0, 1]")


# Parameter presets standing in for the three vendor boosters.
PRESETS = {
    "lgb": GbdtParams(n_trees=500, learning_rate=0.05, max_depth=6, min_samples_leaf=20, n_bins=64),
    "xgb": GbdtParams(n_trees=300, learning_rate=0.1, max_depth=6, min_samples_leaf=5, n_bins=128),
    "cat": GbdtParams(n_trees=500, learning_rate=0.03, max_depth=4, min_samples_leaf=1, n_bins=32),
}


def preset(name: str, **overrides) -> GbdtParams:
    try:
        base = PRESETS[name]
    except KeyError:
        raise ParameterError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
    return replace(base, **overrides)


@dataclass
class Tree:
    feature: np.ndarray  # -1 marks a leaf
    split_bin: np.ndarray
    threshold: np.ndarray
    missing_left: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    gain: np.ndarray

    @property
    def n_leaves(self) -> int:
        return int((self.feature < 0).sum())

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "split_bin": self.split_bin.tolist(),
            "threshold": self.threshold.tolist(),
            "missing_left": self.missing_left.astype(int).tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
            "gain": self.gain.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Tree":
        return cls(
            np.array(d["feature"], dtype=np.int64),
            np.array(d["split_bin"], dtype=np.int64),
            np.array(d["threshold"], dtype=np.float64),
            np.array(d["missing_left"], dtype=bool),
            np.array(d["left"], dtype=np.int64),
            np.array(d["right"], dtype=np.int64),
            np.array(d["value"], dtype=np.float64),
            np.array(d["gain"], dtype=np.float64),
        )

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf values for raw feature rows."""
        node = np.zeros(len(X), dtype=np.int64)
        rows = np.arange(len(X))
        while True:
            f = self.feature[node]
            inner = f >= 0
            if not inner.any():
                return self.value[node]
            x = X[rows, np.maximum(f, 0)]
            with np.errstate(invalid="ignore"):
                go_left = np.where(np.isnan(x), self.missing_left[node], x <= self.threshold[node])
            node = np.where(inner, np.where(go_left, self.left[node], self.right[node]), node)

    def apply_binned(self, B: np.ndarray, missing_bin: int) -> np.ndarray:
        node = np.zeros(len(B), dtype=np.int64)
        rows = np.arange(len(B))
        while True:
            f = self.feature[node]
            inner = f >= 0
            if not inner.any():
                return self.value[node]
            b = B[rows, np.maximum(f, 0)]
            go_left = np.where(b == missing_bin, self.missing_left[node], b <= self.split_bin[node])
            node = np.where(inner, np.where(go_left, self.left[node], self.right[node]), node)


def schema_hash(names) -> str:
    return hashlib.sha256("\n".join(names).encode()).hexdigest()


@dataclass
class GbdtModel:
    feature_names: tuple[str, ...]
    init: float
    trees: list[Tree]
    params: GbdtParams
    bin_edges: list[np.ndarray]
    gains: np.ndarray
    total_gain: float
    constant_target: bool = False
    metadata: dict = field(default_factory=dict)

    @property
    def learning_rate(self) -> float:
        return self.params.learning_rate

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != len(self.feature_names):
            raise DomainError(f"expected {len(self.feature_names)} columns, got shape {X.shape}")
        pred = np.full(len(X), self.init)
        for tree in self.trees:
            pred += self.learning_rate * tree.apply(X)
        return pred

    def staged_predict(self, X):
        X = np.asarray(X, dtype=np.float64)
        pred = np.full(len(X), self.init)
        yield pred.copy()
        for tree in self.trees:
            pred += self.learning_rate * tree.apply(X)
            yield pred.copy()

    def to_dict(self) -> dict:
        return {
            "format_version": GBDT_FORMAT_VERSION,
            "kind": "gbdt",
            "feature_names": list(self.feature_names),
            "schema_hash": schema_hash(self.feature_names),
            "init": self.init,
            "params": asdict(self.params),
            "bin_edges": [e.tolist() for e in self.bin_edges],
            "gains": self.gains.tolist(),
            "total_gain": self.total_gain,
            "constant_target": self.constant_target,
            "metadata": self.metadata,
            "trees": [t.to_dict() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GbdtModel":
        if d.get("format_version") != GBDT_FORMAT_VERSION or d.get("kind") != "gbdt":
            raise FormatError("not a GBDT model file of a supported version")
        names = tuple(d["feature_names"])
        if d["schema_hash"] != schema_hash(names):
            raise FormatError("model schema hash does not match its feature names")
        return cls(
            names, float(d["init"]), [Tree.from_dict(t) for t in d["trees"]],
            GbdtParams(**d["params"]), [np.array(e, dtype=np.float64) for e in d["bin_edges"]],
            np.array(d["gains"], dtype=np.float64), float(d["total_gain"]),
            bool(d["constant_target"]), dict(d.get("metadata", {})),
        )

    def save(self, path: str | os.PathLike) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path: str | os.PathLike) -> "GbdtModel":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


# -- binning --------------------------------------------------------------


def quantile_edges(x: np.ndarray, n_bins: int) -> np.ndarray:
    """Split thresholds for one feature, at most ``n_bins - 1`` of them.

    Thresholds are midpoints between consecutive distinct values located at
    the (lower) quantiles, so the induced partition depends only on ranks.
    """
    v = x[~np.isnan(x)]
    u = np.unique(v)
    if len(u) < 2:
        return np.empty(0)
    if len(u) <= n_bins:
        idx = np.arange(len(u) - 1)
    else:
        qs = np.quantile(v, np.arange(1, n_bins) / n_bins, method="lower")
        idx = np.unique(np.searchsorted(u, qs))
        idx = idx[idx < len(u) - 1]
    return np.unique((u[idx] + u[idx + 1]) / 2.0)


def bin_matrix(X: np.ndarray, edges: list[np.ndarray]) -> tuple[np.ndarray, int]:
    """Bin index per cell; NaN goes to a shared missing bin (returned)."""
    missing_bin = max((len(e) for e in edges), default=0) + 1
    B = np.empty(X.shape, dtype=np.int32)
    for j, e in enumerate(edges):
        col = X[:, j]
        b = np.searchsorted(e, col, side="left")
        b[np.isnan(col)] = missing_bin
        B[:, j] = b
    return B, missing_bin


# -- tree growing ---------------------------------------------------------


def _best_split(Bn, r, n_edges, missing_bin, min_leaf):
    n, p = Bn.shape
    width = missing_bin + 1
    flat = (Bn + (np.arange(p) * width)[None, :]).ravel()
    G = np.bincount(flat, weights=np.broadcast_to(r[:, None], Bn.shape).ravel(), minlength=p * width)
    C = np.bincount(flat, minlength=p * width).astype(np.float64)
    G = G.reshape(p, width)
    C = C.reshape(p, width)
    Gm, Cm = G[:, missing_bin], C[:, missing_bin]
    GL = np.cumsum(G[:, :missing_bin], axis=1)
    CL = np.cumsum(C[:, :missing_bin], axis=1)
    S = r.sum()
    parent = S * S / n
    valid_bin = np.arange(missing_bin)[None, :] < n_edges[:, None]

    def gain(gl, cl):
        gr, cr = S - gl, n - cl
        ok = valid_bin & (cl >= min_leaf) & (cr >= min_leaf)
        with np.errstate(divide="ignore", invalid="ignore"):
            g = gl * gl / cl + gr * gr / cr - parent
        return np.where(ok, g, -np.inf), cl, cr

    g_right, cl_a, cr_a = gain(GL, CL)  # missing goes right
    g_left, _, _ = gain(GL + Gm[:, None], CL + Cm[:, None])  # missing goes left
    both = np.stack([g_right, g_left], axis=-1)
    k = int(np.argmax(both))
    best = both.flat[k]
    if not np.isfinite(best) or best <= 1e-12 * float(r @ r):
        return None
    f, b, opt = np.unravel_index(k, both.shape)
    if Cm[f] > 0:
        miss_left = bool(opt == 1)
    else:
        miss_left = bool(cl_a[f, b] >= cr_a[f, b])
    return int(f), int(b), miss_left, float(best)


def _grow_tree(B, r, rows, edges, n_edges, missing_bin, params) -> Tree:
    feature, split_bin, threshold, miss_left, left, right, value, gains = ([] for _ in range(8))

    def build(rows, depth):
        idx = len(feature)
        rr = r[rows]
        for lst, v in ((feature, -1), (split_bin, -1), (threshold, 0.0), (miss_left, False),
                       (left, -1), (right, -1), (value, float(rr.mean())), (gains, 0.0)):
            lst.append(v)
        if depth >= params.max_depth or len(rows) < 2 * params.min_samples_leaf:
            return idx
        split = _best_split(B[rows], rr, n_edges, missing_bin, params.min_samples_leaf)
        if split is None:
            return idx
        f, b, ml, g = split
        col = B[rows, f]
        go_left = np.where(col == missing_bin, ml, col <= b)
        feature[idx], split_bin[idx], threshold[idx] = f, b, float(edges[f][b])
        miss_left[idx], gains[idx] = ml, g
        left[idx] = build(rows[go_left], depth + 1)
        right[idx] = build(rows[~go_left], depth + 1)
        return idx

    build(rows, 0)
    return Tree(
        np.array(feature, dtype=np.int64), np.array(split_bin, dtype=np.int64),
        np.array(threshold, dtype=np.float64), np.array(miss_left, dtype=bool),
        np.array(left, dtype=np.int64), np.array(right, dtype=np.int64),
        np.array(value, dtype=np.float64), np.array(gains, dtype=np.float64),
    )


def gbdt_fit(X, y, params: GbdtParams = GbdtParams(), feature_names=None, return_history: bool = False):
    """Fit a least-squares boosted ensemble.

    Stage 0 predicts the target mean. With ``return_history`` the training
    MSE after every stage is returned alongside the model.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or y.shape != (X.shape[0],):
        raise DomainError(f"shape mismatch: X {X.shape}, y {y.shape}")
    n, p = X.shape
    if n == 0:
        raise DomainError("cannot fit on zero rows")
    if not np.all(np.isfinite(y)):
        raise DomainError("target contains non-finite values")
    names = tuple(feature_names) if feature_names is not None else tuple(f"x{i}" for i in range(p))
    if len(names) != p:
        raise DomainError("feature_names length does not match column count")

    edges = [quantile_edges(X[:, j], params.n_bins) for j in range(p)]
    n_edges = np.array([len(e) for e in edges], dtype=np.int64)
    gains = np.zeros(p)
    total_gain = 0.0
    constant = bool(np.ptp(y) == 0)
    init = float(y[0]) if constant else float(y.mean())
    pred = np.full(n, init)
    history = [float(np.mean((y - pred) ** 2))]
    trees: list[Tree] = []
    if not constant and params.n_trees > 0:
        B, missing_bin = bin_matrix(X, edges)
        rng = np.random.default_rng(params.seed)
        all_rows = np.arange(n)
        n_sub = max(1, int(round(params.subsample * n)))
        for _ in range(params.n_trees):
            rows = all_rows if n_sub == n else np.sort(rng.choice(n, size=n_sub, replace=False))
            tree = _grow_tree(B, y - pred, rows, edges, n_edges, missing_bin, params)
            split = tree.feature >= 0
            for f, g in zip(tree.feature[split], tree.gain[split]):
                gains[f] += g
                total_gain += g
            trees.append(tree)
            pred += params.learning_rate * tree.apply_binned(B, missing_bin)
            history.append(float(np.mean((y - pred) ** 2)))
    model = GbdtModel(names, init, trees, params, edges, gains, total_gain, constant)
    return (model, history) if return_history else model


def feature_importance(model: GbdtModel) -> dict[str, float]:
    """Total split gain per feature (0 for features never split on)."""
    return {name: float(g) for name, g in zip(model.feature_names, model.gains)}


def select_top_n(importances: dict[str, float], n: int) -> list[str]:
    """The ``n`` highest-scoring names; ties broken by ascending name."""
    if n < 0 or n > len(importances):
        raise ParameterError(f"cannot select {n} of {len(importances)} features")
    ranked = sorted(importances.items(), key=lambda kv: (-kv[1], kv[0]))
    return [name for name, _ in ranked[:n]]
