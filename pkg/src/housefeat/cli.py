"""Command-line entry point: ``housefeat <command> --config run.yaml``."""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

from .config import RunConfig
from .errors import HousefeatError, SchemaError
from .evaluation import (
    MetricReport,
    MetricRow,
    mae,
    prepare_dataset,
    r_squared,
    resolve_features,
    run_experiment,
    training_rows,
)
from .models import (
    GbdtModel,
    feature_importance,
    fit_model,
    load_model,
    predict,
    save_model,
    schema_hash,
    select_top_n,
)
from .pipeline import run_embed, run_extract
from .plots import experiment_chart, importance_chart
from .records import load_feature_table, load_listings

log = logging.getLogger("housefeat")


def _load_config(args) -> RunConfig:
    if args.config:
        cfg = RunConfig.load(args.config, seed=args.seed)
    else:
        cfg = RunConfig.from_dict({}, ".", seed=args.seed)
    if args.jobs is not None:
        cfg.jobs = args.jobs
    if args.out is not None:
        cfg.paths.out_dir = args.out
    return cfg


def _out(cfg: RunConfig) -> Path:
    out = Path(cfg.paths.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _table_path(cfg, args) -> Path:
    return Path(args.table) if getattr(args, "table", None) else _out(cfg) / "features.csv"


def _load_table_and_listings(cfg, args):
    path = _table_path(cfg, args)
    if not path.exists():
        raise HousefeatError(f"feature table {path} not found; run 'extract' first")
    cfg.require_inputs("metadata")
    listings, _ = load_listings(cfg.paths.metadata)
    return load_feature_table(path), listings


def cmd_extract(cfg, args) -> int:
    summary = run_extract(cfg)
    print(f"extracted {summary.n_ok}/{summary.n_listings} listings -> {summary.table_path}")
    if summary.errors:
        print(f"{len(summary.errors)} problems logged in {Path(cfg.paths.out_dir) / 'extract_errors.csv'}")
    return 0 if summary.n_ok > 0 else 1


def cmd_embed(cfg, args) -> int:
    path, errors = run_embed(cfg)
    print(f"embeddings -> {path} ({len(errors)} images failed)")
    return 0


def cmd_fit(cfg, args) -> int:
    table, listings = _load_table_and_listings(cfg, args)
    spec = cfg.experiment_spec()
    ds = prepare_dataset(table, listings, cfg.fit.split_ratio, cfg.seed)
    names = resolve_features(cfg.fit.features, table.columns)
    cols = table.select(names)
    out = _out(cfg)
    for target in cfg.fit.targets:
        rows = training_rows(ds, target, spec)
        model = fit_model(cfg.fit.model, cols[rows], ds.targets[target][rows], names,
                          seed=cfg.seed, ridge_alpha=cfg.fit.ridge_alpha)
        meta = {"target": target, "model": cfg.fit.model, "table_schema_hash": schema_hash(table.columns),
                "seed": cfg.seed, "split_ratio": cfg.fit.split_ratio}
        save_model(model, out / f"model_{target}.json", meta)
        print(f"model_{target}.json: {cfg.fit.model} on {len(names)} features")
    return 0


def _check_schema(model, table):
    expected = model.metadata.get("table_schema_hash")
    if expected is not None and expected != schema_hash(table.columns):
        raise SchemaError("feature table schema differs from the one the model was fit on; refusing")


def cmd_evaluate(cfg, args) -> int:
    table, listings = _load_table_and_listings(cfg, args)
    out = _out(cfg)
    report = MetricReport([])
    for target in cfg.fit.targets:
        model = load_model(out / f"model_{target}.json")
        _check_schema(model, table)
        ratio = model.metadata.get("split_ratio", cfg.fit.split_ratio)
        ds = prepare_dataset(table, listings, ratio, model.metadata.get("seed", cfg.seed))
        test = ds.split.test
        pred = predict(model, table.take([table.listing_ids[i] for i in test]))
        y = ds.targets[target][test]
        report.rows.append(MetricRow("fit", target, model.metadata.get("model", cfg.fit.model),
                                     mae(y, pred), r_squared(y, pred), len(model.feature_names)))
    report.write_csv(out / "evaluation.csv")
    for r in report.rows:
        print(f"{r.target}: MAE {r.mae:.4f}  R2 {r.r2:.4f}")
    return 0


def _gbdt(out, target) -> GbdtModel:
    model = load_model(out / f"model_{target}.json")
    if not isinstance(model, GbdtModel):
        raise HousefeatError(f"model_{target}.json is linear; importance needs a boosted model")
    return model


def cmd_importance(cfg, args) -> int:
    out = _out(cfg)
    for target in cfg.fit.targets:
        imp = feature_importance(_gbdt(out, target))
        ranked = sorted(imp.items(), key=lambda kv: (-kv[1], kv[0]))
        with open(out / f"importance_{target}.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("feature", "gain"))
            w.writerows((k, repr(v)) for k, v in ranked)
        importance_chart(imp, out / f"importance_{target}.svg", f"importance for {target} (MLS outlined)")
        print(f"importance_{target}.csv / .svg")
    return 0


def _read_importance(path) -> dict[str, float]:
    with open(path, newline="") as fh:
        return {row["feature"]: float(row["gain"]) for row in csv.DictReader(fh)}


def cmd_select(cfg, args) -> int:
    out = _out(cfg)
    n = args.n if args.n is not None else cfg.fit.select_n
    for target in cfg.fit.targets:
        path = out / f"importance_{target}.csv"
        imp = _read_importance(path) if path.exists() else feature_importance(_gbdt(out, target))
        chosen = select_top_n(imp, n)
        (out / f"selected_{target}.txt").write_text("".join(f"{c}\n" for c in chosen))
        print(f"selected_{target}.txt: {len(chosen)} features")
    return 0


def cmd_experiment(cfg, args) -> int:
    table, listings = _load_table_and_listings(cfg, args)
    report = run_experiment(cfg.experiment_spec(), table, listings)
    out = _out(cfg)
    report.write_csv(out / "experiment_report.csv")
    report.write_table(out / "experiment_table.csv")
    report.write_timings(out / "experiment_timings.csv")
    experiment_chart(report, out / "experiment_r2.svg")
    print((out / "experiment_table.csv").read_text())
    return 0


COMMANDS = {
    "extract": (cmd_extract, "extract image features and write the feature table"),
    "embed": (cmd_embed, "compute toy embeddings for indoor images"),
    "fit": (cmd_fit, "fit one model per target on the training partition"),
    "evaluate": (cmd_evaluate, "score fitted models on the test partition"),
    "importance": (cmd_importance, "write gain importances and charts"),
    "select": (cmd_select, "write the top-n features per target"),
    "experiment": (cmd_experiment, "run the feature-combination comparison"),
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="run configuration (YAML)")
    common.add_argument("--seed", type=int, help="override the configured seed")
    common.add_argument("--jobs", type=int, help="worker processes for extraction")
    common.add_argument("--out", help="output directory")
    common.add_argument("-v", "--verbose", action="store_true")
    parser = argparse.ArgumentParser(prog="housefeat", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, parents=[common], help=help_text)
        if name in ("fit", "evaluate", "experiment"):
            p.add_argument("--table", help="feature table (default: <out>/features.csv)")
        if name == "select":
            p.add_argument("--n", type=int, help="number of features to keep")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _load_config(args)
        return COMMANDS[args.command][0](cfg, args)
    except HousefeatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
