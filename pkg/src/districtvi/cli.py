"""Command line front end.

Exit codes: 0 success, 1 validation or domain failure, 2 I/O or config failure.
Set ``DISTRICTVI_LOG`` (DEBUG, INFO, WARNING...) for log verbosity.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

from . import data_model
from . import feature_weights as fw
from . import ga_optimizer as ga
from . import pipeline as pl
from .report import (cluster_histogram_svg, emit_report, ga_history_svg,
                     regression_svg, silhouette_svg, weights_bar_svg)
from .vitality import TrendModel, prediction_csv

log = logging.getLogger("districtvi")


def _int_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(t) for t in text.replace(" ", "").split(",") if t)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma separated integers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--data", type=Path, required=True, help="dataset CSV")
    common.add_argument("--features", type=Path, help="feature spec JSON (default: the 8 built-in features)")
    common.add_argument("--year", type=int, help="year to cluster (default: latest)")
    common.add_argument("--mode", choices=("optimize", "fixed"), help="GA search or fixed cluster count")
    common.add_argument("--k", type=int, help="cluster count (fixed mode; locks the GA k gene otherwise)")
    common.add_argument("--mask", type=_int_list, help="feature ids, e.g. 1,6,7,8")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", type=Path, default=Path("out"))
    common.add_argument("--targets", type=_int_list, help="prediction years, e.g. 2021,2026")
    common.add_argument("--pooled", action="store_true", help="normalize all years together")
    g = common.add_argument_group("GA overrides")
    g.add_argument("--generations", type=int)
    g.add_argument("--population", type=int)
    g.add_argument("--mutation-rate", type=float)
    g.add_argument("--breed-fraction", type=float)
    g.add_argument("--k-range", type=_int_list, help="min,max for the k gene")
    g.add_argument("--n-init-range", type=_int_list)
    g.add_argument("--max-iter-range", type=_int_list)
    g.add_argument("--reinit-whole", action="store_true")
    g = common.add_argument_group("k-means overrides (fixed mode)")
    g.add_argument("--n-init", type=int, default=10)
    g.add_argument("--max-iter", type=int, default=300)
    g.add_argument("--tol", type=float, default=1e-6)
    g = common.add_argument_group("forest overrides")
    g.add_argument("--trees", type=int)
    g.add_argument("--max-depth", type=int)
    g.add_argument("--min-samples-leaf", type=int)
    g.add_argument("--features-per-split")
    g.add_argument("--no-bootstrap", action="store_true")

    parser = argparse.ArgumentParser(prog="districtvi", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in (
        ("validate", "check the dataset"),
        ("cluster", "fixed-configuration clustering and vitality indices"),
        ("optimize", "GA search for the clustering configuration"),
        ("weigh", "feature weights from all feature subsets"),
        ("predict", "per-district trend lines and predictions"),
        ("run-all", "every stage plus report.json and SVG figures"),
    ):
        sub.add_parser(name, parents=[common], help=help_)
    return parser


def config_from_args(args) -> pl.RunConfig:
    gcfg = ga.GAConfig()
    over = {}
    for name in ("generations", "population", "mutation_rate", "breed_fraction"):
        if getattr(args, name) is not None:
            over[name] = getattr(args, name)
    ranges = {}
    for name in ("k", "n_init", "max_iter"):
        r = getattr(args, f"{name}_range")
        if r is not None:
            if len(r) != 2:
                raise ValueError(f"--{name.replace('_', '-')}-range needs two values")
            ranges[name] = r
    if ranges:
        over["ranges"] = ga.GeneRanges(**ranges)
    if args.reinit_whole:
        over["reinit_whole"] = True
    if over:
        gcfg = replace(gcfg, **over)
    fcfg = fw.ForestConfig()
    fover = {}
    if args.trees is not None:
        fover["n_trees"] = args.trees
    if args.max_depth is not None:
        fover["max_depth"] = args.max_depth
    if args.min_samples_leaf is not None:
        fover["min_samples_leaf"] = args.min_samples_leaf
    if args.features_per_split is not None:
        fps = args.features_per_split
        fover["features_per_split"] = fps if fps == "all" else int(fps)
    if args.no_bootstrap:
        fover["bootstrap"] = False
    if fover:
        fcfg = replace(fcfg, **fover)
    mode = args.mode
    if mode is None:
        mode = "fixed" if args.command == "cluster" else "optimize"
    return pl.RunConfig(
        data=args.data, features=args.features, year=args.year, mode=mode, k=args.k,
        mask=args.mask, ga=gcfg, n_init=args.n_init, max_iter=args.max_iter, tol=args.tol,
        forest=fcfg, targets=args.targets, out=args.out, seed=args.seed, pooled=args.pooled,
    )


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def cmd_validate(cfg: pl.RunConfig) -> int:
    ds = pl.load(cfg, allow_duplicates=True)
    issues = data_model.validate(ds)
    for note in data_model.advisories(ds):
        print(f"advisory: {note}", file=sys.stderr)
    if issues:
        for issue in issues:
            print(issue, file=sys.stderr)
        return 1
    print(f"ok: {len(ds.records)} records, {len(ds.specs)} features, years {list(ds.years)}")
    return 0


def _prepare(cfg: pl.RunConfig):
    ds = pl.load(cfg)
    pl.check(ds)
    year = pl.main_year(cfg, ds)
    mats = pl.matrices(cfg, ds)
    return ds, year, mats


def _best(cfg, ds, mats, year):
    if cfg.mode == "fixed":
        return pl.chosen_config(cfg, ds, None), None
    best, hist = pl.optimize_cached(cfg, ds, mats[year])
    return best, hist


def cmd_cluster(cfg: pl.RunConfig) -> int:
    ds, year, mats = _prepare(cfg)
    chrom, hist = _best(cfg, ds, mats, year)
    cl = pl.cluster(cfg, ds, mats, chrom, year)
    fragment = {"clustering": cl["clustering"], "silhouette": cl["silhouette"],
                "vitality": {str(year): cl["vitality"][str(year)]}}
    pl.write_json(cfg.out / "cluster.json", fragment)
    sizes = cl["clustering"]["sizes"]
    _write(cfg.out / "cluster_histogram.svg", cluster_histogram_svg(list(sizes.values()), list(sizes)))
    inv = {int(c): letter for c, letter in cl["clustering"]["letters"].items()}
    sil = cl["silhouette"]
    order = sorted(range(len(sil["labels"])), key=lambda i: inv[sil["labels"][i]])
    _write(cfg.out / "silhouette.svg", silhouette_svg(
        [sil["per_cluster_sorted"][i] for i in order], sil["mean_score"],
        [inv[sil["labels"][i]] for i in order]))
    print(f"year {year}: {chrom.describe()}, silhouette {cl['clustering']['silhouette']:.4f}")
    print("clusters: " + ", ".join(f"{k}={v}" for k, v in sizes.items()))
    for da, row in sorted(cl["vitality"][str(year)].items()):
        print(f"{da}\t{row['district_id']}\t{row['vi']}")
    return 0


def cmd_optimize(cfg: pl.RunConfig) -> int:
    ds, year, mats = _prepare(cfg)
    best, hist = pl.optimize_cached(cfg, ds, mats[year])
    pl.write_json(cfg.out / "ga_history.json", hist.to_dict())
    _write(cfg.out / "ga_history.svg", ga_history_svg(hist.max_fitness, hist.mean_fitness))
    print(f"best: n_init={best.n_init} max_iter={best.max_iter} k={best.k} "
          f"features={','.join(map(str, best.feature_mask))}")
    print(f"silhouette: {hist.best_fitness:.4f} after {len(hist.max_fitness)} generations")
    return 0


def cmd_weigh(cfg: pl.RunConfig) -> int:
    ds, year, mats = _prepare(cfg)
    chrom, _ = _best(cfg, ds, mats, year)
    weights = pl.weigh(cfg, ds, mats[year], chrom)
    pl.write_json(cfg.out / "weights.json", weights)
    _write(cfg.out / "weights.svg", weights_bar_svg(weights["feature_ids"], weights["weights"],
                                                    weights["ordering"]))
    print(f"{weights['n_runs']} subset runs (k={chrom.k}), {weights['n_failed']} failed")
    print(weights["table"])
    return 0


def cmd_predict(cfg: pl.RunConfig) -> int:
    ds, year, mats = _prepare(cfg)
    chrom, _ = _best(cfg, ds, mats, year)
    cl = pl.cluster(cfg, ds, mats, chrom, year)
    trends = pl.predict(cfg, ds, cl["vitality"])
    pl.write_json(cfg.out / "predictions.json", trends)
    _write(cfg.out / "predictions.csv", prediction_csv(trends["table"]))
    for d, t in sorted(trends["districts"].items()):
        model = TrendModel.from_dict(t["model"])
        _write(cfg.out / "regression" / f"{d}.svg",
               regression_svg([tuple(p) for p in t["points"]], model, trends["targets"],
                              title=f"District {d}"))
        preds = ", ".join(f"{p['year']}: {p['numeric']}{' (clamped)' if p['clamped'] else ''}"
                          for p in t["predictions"])
        print(f"{d}\tslope {model.slope:+.4f}/yr\t{preds}")
    for d, err in sorted(trends["errors"].items()):
        print(f"error: {err}", file=sys.stderr)
    return 1 if trends["errors"] else 0


def cmd_run_all(cfg: pl.RunConfig) -> int:
    ds, year, mats = _prepare(cfg)
    chrom, hist = _best(cfg, ds, mats, year)
    cl = pl.cluster(cfg, ds, mats, chrom, year)
    weights = pl.weigh(cfg, ds, mats[year], chrom)
    trends = pl.predict(cfg, ds, cl["vitality"])
    report = pl.build_report(cfg, ds, year, cl, hist, weights, trends)
    missing = report.missing_references(
        {r.da_id for r in ds.records}, {r.district_id for r in ds.records})
    if missing:
        raise pl.StageError("report", "; ".join(missing[:5]))
    try:
        manifest = emit_report(report, cfg.out)
    except OSError as exc:
        raise pl.StageError("report", str(exc), exit_code=2) from exc
    print(f"{chrom.describe()}; silhouette {cl['clustering']['silhouette']:.4f}")
    print(f"wrote {len(manifest['files'])} files to {cfg.out}")
    if trends["errors"]:
        for err in trends["errors"].values():
            print(f"warning: {err}", file=sys.stderr)
    return 0


COMMANDS = {
    "validate": cmd_validate,
    "cluster": cmd_cluster,
    "optimize": cmd_optimize,
    "weigh": cmd_weigh,
    "predict": cmd_predict,
    "run-all": cmd_run_all,
}


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("DISTRICTVI_LOG", "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = config_from_args(args)
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        return COMMANDS[args.command](cfg)
    except pl.StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
