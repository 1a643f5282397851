"""Per-feature transformation pipeline: impute, log scale, MinMax, invert.

Every output column lies in [0, 1] with 1 meaning "better".
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from .data_model import Dataset, ImputeStrategy


@dataclass(frozen=True)
class FeatureMatrix:
    values: np.ndarray  # (n, d), all in [0, 1]
    row_ids: tuple[tuple[str, int], ...]
    col_ids: tuple[int, ...]

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2 or values.shape != (len(self.row_ids), len(self.col_ids)):
            raise ValueError(
                f"values shape {values.shape} does not match "
                f"{len(self.row_ids)} rows x {len(self.col_ids)} columns"
            )
        if len(set(self.row_ids)) != len(self.row_ids):
            raise ValueError("row ids are not unique")
        if len(set(self.col_ids)) != len(self.col_ids):
            raise ValueError("column ids are not unique")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "row_ids", tuple(self.row_ids))
        object.__setattr__(self, "col_ids", tuple(self.col_ids))

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def columns(self, feature_ids: Iterable[int]) -> "FeatureMatrix":
        """Column subset, kept in the order given."""
        feature_ids = tuple(feature_ids)
        try:
            idx = [self.col_ids.index(f) for f in feature_ids]
        except ValueError:
            missing = sorted(set(feature_ids) - set(self.col_ids))
            raise KeyError(f"unknown feature ids {missing}") from None
        return FeatureMatrix(self.values[:, idx], self.row_ids, feature_ids)


def impute(column: Sequence[Optional[float]], strategy: ImputeStrategy = "mean") -> list[float]:
    present = [float(v) for v in column if v is not None]
    if strategy == "mean":
        if not present:
            raise ValueError("cannot impute a mean: column has no present values")
        fill = float(np.mean(present))
    else:
        fill = float(strategy)
    return [fill if v is None else float(v) for v in column]


def log_scale(column: Sequence[float]) -> list[float]:
    x = np.asarray(column, dtype=float)
    if np.any(x < 0):
        raise ValueError("log scaling needs non-negative values")
    return np.log1p(x).tolist()


def minmax(column: Sequence[float]) -> list[float]:
    """MinMax to [0, 1]; a constant column maps to 0.5."""
    x = np.asarray(column, dtype=float)
    if x.size == 0:
        raise ValueError("cannot normalize an empty column")
    lo, hi = x.min(), x.max()
    if hi == lo:
        return [0.5] * x.size
    with np.errstate(over="ignore"):
        span = hi - lo
    if not np.isfinite(span):
        # range overflows float64; halve everything first
        x, lo, span = x * 0.5, lo * 0.5, hi * 0.5 - lo * 0.5
    return np.clip((x - lo) / span, 0.0, 1.0).tolist()


def invert(column: Sequence[float]) -> list[float]:
    x = np.asarray(column, dtype=float)
    if np.any((x < 0) | (x > 1)):
        raise ValueError("invert expects values in [0, 1]")
    return (1.0 - x).tolist()


def _transform(column, spec) -> list[float]:
    col = impute(column, spec.impute)
    if spec.log_scale:
        col = log_scale(col)
    col = minmax(col)
    if spec.invert:
        col = invert(col)
    return col


def build_feature_matrix(
    ds: Dataset,
    year: Optional[int],
    feature_ids: Optional[Iterable[int]] = None,
    pooled: bool = False,
) -> FeatureMatrix:
    """Normalized matrix for one year's records (``year=None``: all years).

    With ``pooled=False`` each year is normalized on its own; with
    ``pooled=True`` imputation and MinMax use every year's values at once.
    """
    if feature_ids is None:
        feature_ids = ds.feature_ids
    feature_ids = tuple(feature_ids)
    if not feature_ids:
        raise ValueError("feature_ids must not be empty")
    unknown = [f for f in feature_ids if f not in ds.feature_ids]
    if unknown:
        raise KeyError(f"unknown feature ids {unknown}")
    if year is not None and year not in ds.years:
        raise KeyError(f"year {year} not in dataset (years: {list(ds.years)})")

    years = ds.years if year is None else (year,)
    blocks = []
    row_ids: list[tuple[str, int]] = []
    if pooled:
        groups = [list(ds.records)]
    else:
        groups = [ds.records_for_year(y) for y in years]
    for records in groups:
        cols = []
        for fid in feature_ids:
            spec = ds.spec(fid)
            j = ds.specs.index(spec)
            cols.append(_transform([r.raw[j] for r in records], spec))
        block = np.array(cols, dtype=float).T.reshape(len(records), len(feature_ids))
        keep = [i for i, r in enumerate(records) if r.year in years]
        blocks.append(block[keep])
        row_ids.extend(records[i].key for i in keep)
    return FeatureMatrix(np.vstack(blocks), tuple(row_ids), feature_ids)
