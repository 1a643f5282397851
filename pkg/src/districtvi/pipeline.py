"""Pipeline stages shared by the CLI: each returns a JSON-ready fragment."""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from . import data_model, kmeans, vitality
from . import feature_weights as fw
from . import ga_optimizer as ga
from .preprocess import FeatureMatrix, build_feature_matrix
from .report import RunReport
from .seeding import derive_seed
from .silhouette import silhouette_samples

log = logging.getLogger(__name__)


class StageError(RuntimeError):
    """A pipeline stage failed; ``stage`` names it."""

    def __init__(self, stage: str, message: str, exit_code: int = 1):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage
        self.exit_code = exit_code


@dataclass
class RunConfig:
    data: Path
    features: Optional[Path] = None
    year: Optional[int] = None
    mode: str = "optimize"  # or "fixed"
    k: Optional[int] = None
    mask: Optional[tuple[int, ...]] = None
    ga: ga.GAConfig = field(default_factory=ga.GAConfig)
    n_init: int = 10
    max_iter: int = 300
    tol: float = 1e-6
    forest: fw.ForestConfig = field(default_factory=fw.ForestConfig)
    targets: Optional[tuple[int, ...]] = None
    out: Path = Path("out")
    seed: int = 0
    pooled: bool = False

    def __post_init__(self):
        if self.mode not in ("optimize", "fixed"):
            raise ValueError(f"mode must be 'optimize' or 'fixed', got {self.mode!r}")
        if self.mode == "fixed" and self.k is None:
            raise ValueError("fixed mode needs --k")

    def stage_seed(self, label: str) -> int:
        return derive_seed(self.seed, label)


def load(cfg: RunConfig, allow_duplicates: bool = False) -> data_model.Dataset:
    try:
        specs = data_model.DEFAULT_FEATURES if cfg.features is None \
            else data_model.load_feature_specs(cfg.features)
        return data_model.load_dataset(cfg.data, specs, allow_duplicates)
    except data_model.DataError as exc:
        raise StageError("load", str(exc), exit_code=2) from exc


def check(ds: data_model.Dataset) -> None:
    issues = data_model.validate(ds)
    if issues:
        raise StageError("validate", f"{len(issues)} issue(s): " + "; ".join(issues[:5]))


def main_year(cfg: RunConfig, ds: data_model.Dataset) -> int:
    if cfg.year is None:
        return ds.years[-1]
    if cfg.year not in ds.years:
        raise StageError("preprocess", f"year {cfg.year} not in dataset (years: {list(ds.years)})")
    return cfg.year


def matrices(cfg: RunConfig, ds: data_model.Dataset) -> dict[int, FeatureMatrix]:
    try:
        return {y: build_feature_matrix(ds, y, pooled=cfg.pooled) for y in ds.years}
    except (ValueError, KeyError) as exc:
        raise StageError("preprocess", str(exc)) from exc


def dataset_summary(cfg: RunConfig, ds: data_model.Dataset) -> dict:
    return {
        "source": Path(cfg.data).name,
        "n_records": len(ds.records),
        "years": list(ds.years),
        "feature_ids": list(ds.feature_ids),
        "feature_names": {str(s.id): s.name for s in ds.specs},
        "districts": ds.districts(),
    }


def preprocessing_echo(cfg: RunConfig, ds: data_model.Dataset) -> dict:
    return {
        "normalization": "pooled" if cfg.pooled else "per-year",
        "order": ["impute", "log_scale", "minmax", "invert"],
        "specs": [s.to_dict() for s in ds.specs],
    }


def _ga_config(cfg: RunConfig, m: FeatureMatrix) -> ga.GAConfig:
    gcfg = replace(cfg.ga, seed=cfg.stage_seed("optimize"), fixed_k=cfg.k, fixed_mask=cfg.mask)
    # k must stay below the number of rows
    lo, hi = gcfg.ranges.k
    hi = min(hi, m.shape[0] - 1)
    if cfg.k is None and hi >= lo and hi != gcfg.ranges.k[1]:
        gcfg = replace(gcfg, ranges=replace(gcfg.ranges, k=(lo, hi)))
    return gcfg


def optimize(cfg: RunConfig, m: FeatureMatrix) -> tuple[ga.Chromosome, ga.GAHistory]:
    try:
        return ga.evolve(_ga_config(cfg, m), m)
    except (ValueError, KeyError) as exc:
        raise StageError("optimize", str(exc)) from exc


def cache_key(cfg: RunConfig, ds: data_model.Dataset, stage: str) -> str:
    h = hashlib.sha256()
    h.update(data_model.format_dataset(ds).encode())
    h.update(stage.encode())
    payload = {"ga": asdict(cfg.ga), "k": cfg.k, "mask": cfg.mask, "seed": cfg.seed,
               "year": cfg.year, "pooled": cfg.pooled}
    h.update(json.dumps(payload, sort_keys=True, default=str).encode())
    return h.hexdigest()


def optimize_cached(cfg: RunConfig, ds, m: FeatureMatrix) -> tuple[ga.Chromosome, ga.GAHistory]:
    """GA stage, reusing ``<out>/stages/optimize.json`` when its key matches."""
    path = Path(cfg.out) / "stages" / "optimize.json"
    key = cache_key(cfg, ds, "optimize")
    if path.exists():
        try:
            doc = json.loads(path.read_text(encoding="utf-8"))
            if doc.get("key") == key:
                hist = ga.GAHistory.from_dict(doc["history"])
                log.info("reusing cached GA result from %s", path)
                return hist.best, hist
        except (OSError, ValueError, KeyError, TypeError):
            log.warning("ignoring unreadable stage cache %s", path)
    best, hist = optimize(cfg, m)
    write_json(path, {"key": key, "history": hist.to_dict()})
    return best, hist


def chosen_config(cfg: RunConfig, ds: data_model.Dataset,
                  best: Optional[ga.Chromosome]) -> ga.Chromosome:
    if best is not None:
        return best
    mask = cfg.mask if cfg.mask is not None else ds.feature_ids
    return ga.Chromosome(cfg.n_init, cfg.max_iter, cfg.k, tuple(sorted(mask)))


def cluster(cfg: RunConfig, ds: data_model.Dataset, mats: dict[int, FeatureMatrix],
            chrom: ga.Chromosome, year: int) -> dict:
    """Cluster every year with the chosen configuration and build the
    vitality index of each DA. Returns the clustering, features, vitality and
    silhouette parts of the report."""
    features: dict = {}
    vit: dict = {}
    per_year: dict = {}
    district_of = {r.key: r.district_id for r in ds.records}
    main = None
    for y, m in sorted(mats.items()):
        try:
            sub = m.columns(chrom.feature_mask)
            kcfg = kmeans.KMeansConfig(k=chrom.k, n_init=chrom.n_init, max_iter=chrom.max_iter,
                                       tol=cfg.tol, seed=derive_seed(cfg.seed, "cluster", y))
            res = kmeans.fit(sub, kcfg)
            sil = silhouette_samples(sub, res.assignments)
        except (ValueError, KeyError) as exc:
            raise StageError("cluster", f"year {y}: {exc}") from exc
        scores = 100.0 * m.values.mean(axis=1)
        numerics = [vitality.numeric_part(row) for row in m.values]
        letters = vitality.assign_letters(res.assignments, scores)
        features[str(y)] = {da: [float(v) for v in row] for (da, _), row in zip(m.row_ids, m.values)}
        vit[str(y)] = {
            da: {
                "cluster": int(c),
                "letter": letters[int(c)],
                "numeric": int(n),
                "score": float(s),
                "vi": vitality.format_vi(vitality.VitalityIndex(letters[int(c)], int(n))),
                "district_id": district_of[(da, y)],
            }
            for (da, _), c, n, s in zip(m.row_ids, res.assignments, numerics, scores)
        }
        sizes = np.bincount(res.assignments, minlength=chrom.k)
        per_year[str(y)] = {
            "letters": {str(c): letter for c, letter in sorted(letters.items())},
            "sizes": {letters[c]: int(sizes[c]) for c in sorted(letters)},
            "inertia": res.inertia,
            "silhouette": sil.mean_score,
        }
        if y == year:
            main = (res, sil, letters)
    res, sil, letters = main
    clustering = {
        "mode": cfg.mode,
        "year": year,
        "chromosome": chrom.to_dict(),
        "letters": {str(c): letter for c, letter in sorted(letters.items())},
        "sizes": per_year[str(year)]["sizes"],
        "inertia": res.inertia,
        "silhouette": sil.mean_score,
        "per_year": per_year,
    }
    return {"clustering": clustering, "features": features, "vitality": vit,
            "silhouette": sil.to_dict()}


def weigh(cfg: RunConfig, ds: data_model.Dataset, m: FeatureMatrix, chrom: ga.Chromosome) -> dict:
    base = kmeans.KMeansConfig(k=chrom.k, n_init=chrom.n_init, max_iter=chrom.max_iter,
                               tol=cfg.tol, seed=cfg.stage_seed("weigh"))
    try:
        runs = fw.enumerate_subsets(m, base)
        forest = fw.fit_forest(runs, replace(cfg.forest, seed=cfg.stage_seed("forest")), m.col_ids)
    except ValueError as exc:
        raise StageError("weigh", str(exc)) from exc
    weights = fw.importances(forest)
    names = {s.id: s.name for s in ds.specs}
    out = weights.to_dict(names)
    out["n_runs"] = len(runs)
    out["n_failed"] = sum(r.failed for r in runs)
    out["runs"] = [r.to_dict() for r in runs]
    out["table"] = weights.format_table(names)
    return out


def default_targets(ds: data_model.Dataset) -> tuple[int, ...]:
    last = ds.years[-1]
    return (last + 5, last + 10)


def predict(cfg: RunConfig, ds: data_model.Dataset, vit: dict) -> dict:
    """Per-district OLS over the unrounded numeric scores of all DAs and years."""
    scores = {(da, int(y)): row["score"] for y, rows in vit.items() for da, row in rows.items()}
    points = vitality.district_points(((r.da_id, r.year, r.district_id) for r in ds.records), scores)
    trends, errors = vitality.fit_districts(points)
    targets = tuple(cfg.targets) if cfg.targets else default_targets(ds)
    districts = {}
    for d, t in trends.items():
        preds = []
        for y in targets:
            value, clamped = vitality.predict(t, y)
            preds.append({"year": y, "numeric": value, "clamped": clamped})
        districts[d] = {"model": t.to_dict(), "points": [list(p) for p in points[d]],
                        "predictions": preds}
    return {
        "targets": list(targets),
        "districts": districts,
        "errors": errors,
        "table": vitality.prediction_rows(trends, targets),
    }


def write_json(path: Path, doc) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def build_report(cfg: RunConfig, ds: data_model.Dataset, year: int, cl: dict,
                 hist: Optional[ga.GAHistory], weights: Optional[dict], trends: dict) -> RunReport:
    return RunReport(
        dataset=dataset_summary(cfg, ds),
        preprocessing=preprocessing_echo(cfg, ds),
        clustering=cl["clustering"],
        features=cl["features"],
        vitality=cl["vitality"],
        silhouette=cl["silhouette"],
        ga=None if hist is None else hist.to_dict(),
        weights=weights,
        trends=trends,
    )
