"""Run configuration loaded from a single YAML file."""

from __future__ import annotations

import os
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import yaml

from .color import DEFAULT_GREEN_SPEC, GreenMaskSpec
from .errors import ParameterError
from .evaluation import Combination, ExperimentSpec


@dataclass
class PathsConfig:
    metadata: str = "metadata.csv"
    manifest: str = "manifest.csv"
    image_root: str = "images"
    embeddings: str | None = None
    out_dir: str = "out"


@dataclass
class ExtractConfig:
    entropy_window: int = 9
    region_grid: int = 3
    zooms: list[int] = field(default_factory=lambda: [16, 18, 20])
    green_zoom: int = 20
    green_mask: dict = field(default_factory=DEFAULT_GREEN_SPEC.to_dict)
    derive_masks: bool = False
    palette_k: int = 8
    mask_margin: float = 20.0
    max_palette_pixels: int = 20_000
    pca_budget: int = 200
    pca_variance: float | None = None
    pca_keep: int = 2
    pca_per_category: bool = False
    debug_dumps: bool = False

    def mask_spec(self) -> GreenMaskSpec:
        return GreenMaskSpec.from_dict(self.green_mask)


@dataclass
class FitConfig:
    model: str = "gbdt:lgb"
    features: list[str] = field(default_factory=lambda: ["*"])
    targets: list[str] = field(default_factory=lambda: ["price", "dom"])
    split_ratio: float = 0.7
    n_strata: int = 10
    bootstrap_dom: bool = True
    ridge_alpha: float = 1.0
    select_n: int = 40


def default_experiment() -> dict:
    return {
        "combinations": [
            {"name": "base_1", "features": ["@base_1"]},
            {"name": "base_2", "features": ["@base_2"]},
            {"name": "base_2+indoor", "features": ["@base_2", "@indoor"]},
            {"name": "base_2+outdoor", "features": ["@base_2", "@outdoor"]},
            {"name": "base_2+satellite", "features": ["@base_2", "@satellite"]},
            {"name": "base_2+indoor+outdoor", "features": ["@base_2", "@indoor", "@outdoor"]},
            {"name": "base_2+image", "features": ["@base_2", "@image"]},
            {"name": "lgb_top_n", "features": ["@base_2", "@image"], "top_n": 40},
        ],
    }


def _build(cls, data: dict | None):
    data = dict(data or {})
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ParameterError(f"unknown {cls.__name__} keys: {unknown}")
    return cls(**data)


@dataclass
class RunConfig:
    seed: int
    paths: PathsConfig = field(default_factory=PathsConfig)
    extract: ExtractConfig = field(default_factory=ExtractConfig)
    fit: FitConfig = field(default_factory=FitConfig)
    experiment: dict = field(default_factory=default_experiment)
    jobs: int = 1

    @classmethod
    def from_dict(cls, data: dict, base_dir: str | os.PathLike = ".", seed: int | None = None) -> "RunConfig":
        data = dict(data)
        if seed is not None:
            data["seed"] = seed
        if data.get("seed") is None:
            raise ParameterError("a seed is required (config 'seed' or --seed)")
        paths = _build(PathsConfig, data.pop("paths", None))
        base = Path(base_dir)
        for name in ("metadata", "manifest", "image_root", "embeddings", "out_dir"):
            value = getattr(paths, name)
            if value is not None and not os.path.isabs(value):
                setattr(paths, name, str(base / value))
        cfg = cls(
            seed=int(data.pop("seed")),
            paths=paths,
            extract=_build(ExtractConfig, data.pop("extract", None)),
            fit=_build(FitConfig, data.pop("fit", None)),
            experiment=data.pop("experiment", None) or default_experiment(),
            jobs=int(data.pop("jobs", 1)),
        )
        if data:
            raise ParameterError(f"unknown config keys: {sorted(data)}")
        cfg.extract.mask_spec()
        return cfg

    @classmethod
    def load(cls, path: str | os.PathLike, seed: int | None = None) -> "RunConfig":
        with open(path) as fh:
            data = yaml.safe_load(fh) or {}
        return cls.from_dict(data, Path(path).parent, seed)

    def to_dict(self) -> dict:
        return asdict(self)

    def dump(self, path: str | os.PathLike) -> None:
        with open(path, "w") as fh:
            yaml.safe_dump(self.to_dict(), fh, sort_keys=True)

    def experiment_spec(self) -> ExperimentSpec:
        d = dict(self.experiment)
        d.setdefault("seed", self.seed)
        d.setdefault("split_ratio", self.fit.split_ratio)
        d.setdefault("n_strata", self.fit.n_strata)
        d.setdefault("bootstrap_dom", self.fit.bootstrap_dom)
        d.setdefault("ridge_alpha", self.fit.ridge_alpha)
        combos = [c if isinstance(c, Combination) else Combination(**c) for c in d.pop("combinations")]
        return ExperimentSpec(combinations=combos, **d)

    def require_inputs(self, *names: str) -> None:
        """Fail early when a referenced input path is absent."""
        for name in names:
            value = getattr(self.paths, name)
            if value is None or not os.path.exists(value):
                raise ParameterError(f"paths.{name} does not exist: {value}")
