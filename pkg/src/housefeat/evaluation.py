"""Target transforms, sampling, metrics and feature-combination experiments."""

from __future__ import annotations

import csv
import fnmatch
import os
import time
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import DomainError, ParameterError, SpecError
from .models import feature_importance, fit_model, predict, select_top_n
from .records import FeatureTable, ListingRecord

TARGETS = ("price", "dom")
SCALE_NOTE = "metrics on transformed targets: log(price) and log(1+dom)"

FEATURE_GROUPS = {
    "base_1": ["LOTSIZE", "AGE", "SQFT", "ZIP", "BATHS"],
    "base_2": ["LOTSIZE", "AGE", "SQFT", "ZIP", "BATHS", "BEDS", "GARAGE"],
    "indoor": ["ENT_ind_*", "CG_ind_*", "pca_*", "cat_*"],
    "outdoor": ["ENT_out_*", "CG_out_*", "GREEN_mask"],
    "satellite": ["ENT_sat_*", "CG_sat_*", "GREEN_sat"],
    "image": ["@indoor", "@outdoor", "@satellite"],
    "all": ["*"],
}


# -- transforms -----------------------------------------------------------


def log_transform_price(price):
    p = np.asarray(price, dtype=np.float64)
    if np.any(~(p > 0)):
        raise DomainError("price must be positive")
    out = np.log(p)
    return float(out) if out.ndim == 0 else out


def inverse_log_price(log_price):
    out = np.exp(np.asarray(log_price, dtype=np.float64))
    return float(out) if out.ndim == 0 else out


def log_transform_dom(dom):
    d = np.asarray(dom, dtype=np.float64)
    if np.any(~(d >= 0)):
        raise DomainError("dom must be non-negative")
    out = np.log1p(d)
    return float(out) if out.ndim == 0 else out


def inverse_log_dom(log_dom):
    out = np.expm1(np.asarray(log_dom, dtype=np.float64))
    return float(out) if out.ndim == 0 else out


def transformed_targets(table: FeatureTable, listings: Iterable[ListingRecord]) -> dict[str, np.ndarray]:
    """log price and log(1+dom) aligned with the table's rows."""
    by_id = {r.mls_num: r for r in listings}
    absent = [lid for lid in table.listing_ids if lid not in by_id]
    if absent:
        raise DomainError(f"table rows without metadata: {absent[:5]}")
    rows = [by_id[lid] for lid in table.listing_ids]
    return {
        "price": log_transform_price([r.price for r in rows]),
        "dom": log_transform_dom([r.dom for r in rows]),
    }


# -- sampling -------------------------------------------------------------


def quantile_strata(target, n_strata: int) -> np.ndarray:
    """Stratum label per row from target quantiles; tied edges merge strata."""
    target = np.asarray(target, dtype=np.float64)
    if n_strata < 1:
        raise ParameterError("n_strata must be >= 1")
    distinct = np.unique(target).size
    if n_strata > distinct:
        warnings.warn(f"{n_strata} strata requested but only {distinct} distinct targets; merging",
                      stacklevel=2)
        n_strata = distinct
    edges = np.quantile(target, np.linspace(0, 1, n_strata + 1)[1:-1])
    labels = np.searchsorted(np.unique(edges), target, side="right")
    return np.unique(labels, return_inverse=True)[1]


def stratified_bootstrap(rows, target, n_strata: int = 10, seed: int = 0) -> np.ndarray:
    """Resample with replacement inside target-quantile strata.

    Each stratum keeps its size, so stratum proportions are preserved exactly
    and the output has as many rows as the input.
    """
    rows = np.asarray(rows)
    target = np.asarray(target, dtype=np.float64)
    if rows.size == 0:
        raise DomainError("no rows to resample")
    if rows.shape[0] != target.shape[0]:
        raise DomainError("rows and target differ in length")
    labels = quantile_strata(target, n_strata)
    rng = np.random.default_rng(seed)
    picks = []
    for s in range(labels.max() + 1):
        members = np.flatnonzero(labels == s)
        picks.append(rng.choice(members, size=members.size, replace=True))
    return rows[np.concatenate(picks)]


@dataclass(frozen=True)
class Split:
    train: np.ndarray
    test: np.ndarray


def train_test_split(n_rows: int, ratio: float = 0.7, seed: int = 0) -> Split:
    """Shuffle ``range(n_rows)`` and cut after ``floor(ratio * n)`` rows."""
    if not 0 < ratio < 1:
        raise ParameterError(f"ratio must be in (0, 1), got {ratio}")
    if n_rows < 2:
        raise DomainError("need at least 2 rows to split")
    perm = np.random.default_rng(seed).permutation(n_rows)
    # the epsilon keeps products like 0.7 * 90 from flooring to 62
    cut = int(np.floor(ratio * n_rows + 1e-9))
    if cut == 0 or cut == n_rows:
        raise DomainError(f"ratio {ratio} leaves one side of a {n_rows}-row split empty")
    return Split(np.sort(perm[:cut]), np.sort(perm[cut:]))


@dataclass
class Dataset:
    table: FeatureTable
    targets: dict[str, np.ndarray]
    split: Split


# -- metrics --------------------------------------------------------------


def _pair(targets, predictions):
    t = np.asarray(targets, dtype=np.float64)
    p = np.asarray(predictions, dtype=np.float64)
    if t.shape != p.shape:
        raise DomainError(f"length mismatch: {t.shape} vs {p.shape}")
    if t.size == 0:
        raise DomainError("empty input")
    return t, p


def mae(targets, predictions) -> float:
    t, p = _pair(targets, predictions)
    return float(np.mean(np.abs(t - p)))


def r_squared(targets, predictions) -> float:
    t, p = _pair(targets, predictions)
    sst = np.sum((t - t.mean()) ** 2)
    if sst == 0:
        raise DomainError("target has zero variance")
    return float(1.0 - np.sum((t - p) ** 2) / sst)


# -- experiments ----------------------------------------------------------


@dataclass
class Combination:
    name: str
    features: list[str]
    top_n: int | None = None
    top_n_model: str = "gbdt:lgb"
    models: list[str] | None = None


@dataclass
class ExperimentSpec:
    combinations: list[Combination]
    models: list[str] = field(default_factory=lambda: ["ols", "ridge", "gbdt:lgb", "gbdt:xgb"])
    targets: list[str] = field(default_factory=lambda: list(TARGETS))
    seed: int = 0
    split_ratio: float = 0.7
    n_strata: int = 10
    bootstrap_dom: bool = True
    ridge_alpha: float = 1.0
    one_hot_zip: bool = False

    def __post_init__(self):
        if not 0 < self.split_ratio < 1:
            raise ParameterError("split_ratio must be in (0, 1)")
        unknown = [t for t in self.targets if t not in TARGETS]
        if unknown:
            raise SpecError(f"unknown targets {unknown}")

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentSpec":
        d = dict(d)
        combos = [Combination(**c) for c in d.pop("combinations")]
        return cls(combinations=combos, **d)


def expand_patterns(patterns: Sequence[str], _depth: int = 0) -> list[str]:
    out = []
    for p in patterns:
        if p.startswith("@"):
            group = FEATURE_GROUPS.get(p[1:])
            if group is None or _depth > 4:
                out.append(p)
            else:
                out.extend(expand_patterns(group, _depth + 1))
        else:
            out.append(p)
    return out


def resolve_features(patterns: Sequence[str], columns: Sequence[str]) -> list[str]:
    """Feature names selected by names, glob patterns and ``@group`` tokens.

    The result follows the table's column order. Tokens matching nothing
    raise SpecError listing every offender.
    """
    chosen: set[str] = set()
    offenders = []
    for p in expand_patterns(patterns):
        hits = [c for c in columns if fnmatch.fnmatchcase(c, p)]
        if not hits:
            offenders.append(p)
        chosen.update(hits)
    if offenders:
        raise SpecError(f"unresolvable features: {offenders}")
    return [c for c in columns if c in chosen]


@dataclass
class MetricRow:
    combination: str
    target: str
    model: str
    mae: float
    r2: float
    n_features: int
    wall_time: float = field(default=0.0, compare=False)


REPORT_COLUMNS = ("combination", "target", "model", "n_features", "mae", "r2")


@dataclass
class MetricReport:
    rows: list[MetricRow]
    features: dict[tuple[str, str], list[str]] = field(default_factory=dict)

    def best(self, combination: str, target: str) -> MetricRow:
        cands = [r for r in self.rows if r.combination == combination and r.target == target]
        return max(cands, key=lambda r: r.r2)

    def combinations(self) -> list[str]:
        return list(dict.fromkeys(r.combination for r in self.rows))

    def write_csv(self, path: str | os.PathLike) -> None:
        """Long-form rows, ranked by R^2 within each target. Timings are excluded."""
        order = {t: i for i, t in enumerate(dict.fromkeys(r.target for r in self.rows))}
        ranked = sorted(self.rows, key=lambda r: (order[r.target], -r.r2, r.combination, r.model))
        with open(path, "w", newline="") as fh:
            fh.write(f"# {SCALE_NOTE}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(REPORT_COLUMNS)
            for r in ranked:
                w.writerow([r.combination, r.target, r.model, r.n_features, repr(r.mae), repr(r.r2)])

    def write_table(self, path: str | os.PathLike) -> None:
        """One row per combination: best model and its MAE/R^2 for each target."""
        targets = list(dict.fromkeys(r.target for r in self.rows))
        with open(path, "w", newline="") as fh:
            fh.write(f"# {SCALE_NOTE}\n")
            w = csv.writer(fh, lineterminator="\n")
            header = ["combination"] + [f"best_model_{t}" for t in targets]
            for t in targets:
                header += [f"{t}_mae", f"{t}_r2"]
            w.writerow(header)
            for combo in self.combinations():
                best = [self.best(combo, t) for t in targets]
                row = [combo] + [b.model for b in best]
                for b in best:
                    row += [f"{b.mae:.4f}", f"{b.r2:.4f}"]
                w.writerow(row)

    def write_timings(self, path: str | os.PathLike) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("combination", "target", "model", "wall_time_s"))
            for r in self.rows:
                w.writerow([r.combination, r.target, r.model, f"{r.wall_time:.3f}"])


def load_report(path: str | os.PathLike) -> list[dict]:
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    return list(csv.DictReader(lines))


def prepare_dataset(table: FeatureTable, listings, ratio: float, seed: int) -> Dataset:
    return Dataset(table, transformed_targets(table, listings), train_test_split(len(table), ratio, seed))


def training_rows(ds: Dataset, target: str, spec: ExperimentSpec) -> np.ndarray:
    """Train partition for a target; dom gets a stratified bootstrap."""
    rows = ds.split.train
    if target == "dom" and spec.bootstrap_dom:
        rows = stratified_bootstrap(rows, ds.targets["dom"][rows], spec.n_strata, spec.seed + 1)
    return rows


def one_hot_zip(table: FeatureTable) -> FeatureTable:
    """Append ``ZIP_<code>`` indicator columns (MISSING ZIP gives all zeros)."""
    zips = table.column("ZIP")
    codes = sorted({int(z) for z in zips if not np.isnan(z)})
    extra = np.column_stack([(zips == c).astype(np.float64) for c in codes]) if codes else np.empty((len(table), 0))
    return FeatureTable(table.listing_ids, table.columns + tuple(f"ZIP_{c}" for c in codes),
                        np.hstack([table.values, extra]))


def run_experiment(spec: ExperimentSpec, table: FeatureTable, listings) -> MetricReport:
    """Fit and score every combination x target x model on one shared split."""
    if spec.one_hot_zip:
        table = one_hot_zip(table)

    def patterns(c):
        pats = expand_patterns(c.features)
        return ["ZIP_*" if p == "ZIP" else p for p in pats] if spec.one_hot_zip else pats

    resolved = {c.name: resolve_features(patterns(c), table.columns) for c in spec.combinations}
    ds = prepare_dataset(table, listings, spec.split_ratio, spec.seed)
    train_rows = {t: training_rows(ds, t, spec) for t in spec.targets}
    X_all = table.values
    test = ds.split.test
    report = MetricReport([])
    for combo in spec.combinations:
        for target in spec.targets:
            y = ds.targets[target]
            rows = train_rows[target]
            names = resolved[combo.name]
            if combo.top_n is not None:
                ranker = fit_model(combo.top_n_model, X_all[rows][:, _idx(table, names)], y[rows], names,
                                   seed=spec.seed, ridge_alpha=spec.ridge_alpha)
                names = select_top_n(feature_importance(ranker), min(combo.top_n, len(names)))
                names = [c for c in table.columns if c in set(names)]
            report.features[(combo.name, target)] = names
            cols = _idx(table, names)
            for model_id in combo.models or spec.models:
                t0 = time.perf_counter()
                model = fit_model(model_id, X_all[rows][:, cols], y[rows], names,
                                  seed=spec.seed, ridge_alpha=spec.ridge_alpha)
                pred = predict(model, X_all[test][:, cols])
                report.rows.append(MetricRow(
                    combo.name, target, model_id, mae(y[test], pred), r_squared(y[test], pred),
                    len(names), time.perf_counter() - t0,
                ))
    return report


def _idx(table: FeatureTable, names: Sequence[str]) -> list[int]:
    pos = {c: i for i, c in enumerate(table.columns)}
    return [pos[n] for n in names]
