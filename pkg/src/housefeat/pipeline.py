"""Per-listing extraction driver used by the ``extract`` and ``embed`` commands."""

from __future__ import annotations

import csv
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable

import yaml

from . import color, deep, entropy
from .config import ExtractConfig, RunConfig
from .errors import HousefeatError
from .imageio import load_rgb, save_png
from .records import (
    CATEGORIES,
    ImageAsset,
    assemble_features,
    load_listings,
    load_manifest,
    write_feature_table,
)

log = logging.getLogger(__name__)


@dataclass
class ListingResult:
    listing_id: str
    image_records: list[dict] = field(default_factory=list)
    greenness: dict = field(default_factory=dict)
    embeddings: list[deep.EmbeddingRecord] = field(default_factory=list)
    palettes: list[color.ColorPalette] = field(default_factory=list)
    error: str | None = None


def feature_columns(cfg: ExtractConfig) -> list[str]:
    """Every image feature name the extractor can emit under ``cfg``."""
    names = []
    names += entropy.entropy_feature_names("indoor", grid=cfg.region_grid)
    names += entropy.entropy_feature_names("outdoor", grid=cfg.region_grid)
    for z in cfg.zooms:
        names += entropy.entropy_feature_names("satellite", z, grid=cfg.region_grid)
    names += ["GREEN_mask", "GREEN_sat"]
    names += [f"cat_{c}" for c in CATEGORIES]
    names += deep.pca_feature_names(cfg.pca_keep)
    return names


def _wanted(asset: ImageAsset, cfg: ExtractConfig) -> bool:
    return asset.image_type != "satellite" or asset.zoom in cfg.zooms or asset.zoom == cfg.green_zoom


def _dump_debug(asset, img, spec, cfg, debug_dir):
    stem = asset.path.replace("/", "__").rsplit(".", 1)[0]
    emap = entropy.local_entropy_map(entropy.to_grayscale(img), cfg.entropy_window)
    save_png(entropy.entropy_to_png_array(emap, cfg.entropy_window), Path(debug_dir) / f"{stem}_entropy.png")
    if asset.image_type != "indoor":
        save_png(color.apply_mask(img, spec), Path(debug_dir) / f"{stem}_mask.png")


def extract_listing(
    listing_id: str,
    assets: list[ImageAsset],
    image_root: str,
    cfg: ExtractConfig,
    spec: color.GreenMaskSpec,
    want_embeddings: bool,
    palettes_only: bool = False,
    seed: int = 0,
    debug_dir: str | None = None,
) -> ListingResult:
    """All per-image work for one listing; failures are captured, not raised."""
    res = ListingResult(listing_id)
    scored = []
    try:
        for asset in sorted(assets, key=lambda a: a.path):
            if not _wanted(asset, cfg):
                continue
            img = load_rgb(Path(image_root) / asset.path)
            if palettes_only:
                if asset.image_type != "indoor":
                    res.palettes.append(color.image_palette(img, cfg.palette_k, seed, cfg.max_palette_pixels))
                continue
            if asset.image_type != "satellite" or asset.zoom in cfg.zooms:
                res.image_records.append(
                    entropy.entropy_features(asset, img, cfg.entropy_window, cfg.region_grid))
            if asset.image_type != "indoor":
                scored.append((asset, color.green_fraction(img, spec)))
            if want_embeddings and asset.image_type == "indoor":
                res.embeddings.append(deep.toy_embed(img, asset.image_id))
            if debug_dir is not None:
                _dump_debug(asset, img, spec, cfg, debug_dir)
        res.greenness = color.listing_greenness(scored, cfg.green_zoom)
    except (HousefeatError, OSError, ValueError) as exc:
        res = ListingResult(listing_id, error=f"{type(exc).__name__}: {exc}")
    return res


def _star(args):
    fn, a, kw = args
    return fn(*a, **kw)


def map_ordered(fn: Callable, jobs_args: Iterable[tuple[tuple, dict]], jobs: int) -> list:
    """Apply ``fn`` to each argument set, in input order, optionally in worker processes."""
    work = [(fn, a, kw) for a, kw in jobs_args]
    if jobs <= 1 or len(work) <= 1:
        return [_star(w) for w in work]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_star, work, chunksize=max(1, len(work) // (4 * jobs))))


@dataclass
class ExtractSummary:
    n_listings: int
    n_ok: int
    errors: list[tuple[str, str]]
    table_path: str


def run_extract(cfg: RunConfig) -> ExtractSummary:
    """Extract, assemble and persist the feature table for a corpus."""
    cfg.require_inputs("metadata", "manifest", "image_root")
    ex = cfg.extract
    out = Path(cfg.paths.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    listings, row_errors = load_listings(cfg.paths.metadata)
    manifest = load_manifest(cfg.paths.manifest, cfg.paths.image_root)
    errors: list[tuple[str, str]] = [(f"metadata:{e.line}", e.message) for e in row_errors]
    for e in manifest.errors:
        errors.append((e.listing_id or f"manifest:{e.line}", e.message))
    quarantined = manifest.failed_listings()
    ids = sorted(r.mls_num for r in listings)
    root = cfg.paths.image_root
    want_emb = cfg.paths.embeddings is None
    debug_dir = None
    if ex.debug_dumps:
        debug_dir = str(out / "debug")
        os.makedirs(debug_dir, exist_ok=True)

    spec = ex.mask_spec()
    if ex.derive_masks:
        pal_results = map_ordered(
            extract_listing,
            [((lid, manifest.for_listing(lid), root, ex, spec, False),
              {"palettes_only": True, "seed": cfg.seed}) for lid in ids if lid not in quarantined],
            cfg.jobs,
        )
        palettes = [p for r in pal_results if r.error is None for p in r.palettes]
        if palettes:
            spec = color.derive_masks(palettes, margin=ex.mask_margin, default=spec)
        with open(out / "masks.yaml", "w") as fh:
            yaml.safe_dump({"green_mask": spec.to_dict()}, fh, sort_keys=True)

    results = map_ordered(
        extract_listing,
        [((lid, manifest.for_listing(lid), root, ex, spec, want_emb),
          {"seed": cfg.seed, "debug_dir": debug_dir}) for lid in ids if lid not in quarantined],
        cfg.jobs,
    )
    good = {}
    for r in results:
        if r.error is not None:
            errors.append((r.listing_id, r.error))
            quarantined.add(r.listing_id)
        else:
            good[r.listing_id] = r

    kept = [rec for rec in listings if rec.mls_num in good]
    kept_assets = [a for lid in good for a in manifest.for_listing(lid)]
    if want_emb:
        emb = {e.image_id: e for r in good.values() for e in r.embeddings}
        deep.write_embeddings(sorted(emb.values(), key=lambda e: e.image_id), out / "embeddings.csv")
    else:
        emb = deep.join_embeddings(kept_assets, deep.load_embeddings(cfg.paths.embeddings))

    models = deep.fit_category_models(kept_assets, emb, ex.pca_budget, ex.pca_variance, ex.pca_per_category)
    if isinstance(models, dict):
        for cat, m in models.items():
            m.save(out / f"pca_model_{cat}.json")
    elif models is not None:
        models.save(out / "pca_model.json")

    aggregates = {}
    for lid, r in good.items():
        agg = dict(r.greenness)
        agg.update(deep.listing_deep_features(manifest.for_listing(lid), emb, models, ex.pca_keep))
        aggregates[lid] = agg
    table = assemble_features(
        kept, {lid: r.image_records for lid, r in good.items()}, aggregates, columns=feature_columns(ex))
    table_path = out / "features.csv"
    write_feature_table(table, table_path)
    with open(out / "extract_errors.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("listing_id", "error"))
        w.writerows(errors)
    log.info("extracted %d of %d listings", len(good), len(listings))
    return ExtractSummary(len(listings), len(good), errors, str(table_path))


def run_embed(cfg: RunConfig) -> tuple[str, list[tuple[str, str]]]:
    """Toy-embed every indoor image in the manifest."""
    cfg.require_inputs("manifest", "image_root")
    out = Path(cfg.paths.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = load_manifest(cfg.paths.manifest, cfg.paths.image_root)
    indoor = sorted((a for a in manifest.assets if a.image_type == "indoor"), key=lambda a: a.image_id)
    results = map_ordered(_embed_one, [((a.image_id, cfg.paths.image_root), {}) for a in indoor], cfg.jobs)
    records = [r for r in results if isinstance(r, deep.EmbeddingRecord)]
    errors = [r for r in results if isinstance(r, tuple)]
    path = out / "embeddings.csv"
    deep.write_embeddings(records, path)
    return str(path), errors


def _embed_one(image_id: str, root: str):
    try:
        return deep.toy_embed(load_rgb(Path(root) / image_id), image_id)
    except HousefeatError as exc:
        return (image_id, str(exc))
