"""Two-part vitality index ("C45") and per-district linear trends."""

from __future__ import annotations

import csv
import io
import math
import string
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

LETTERS = string.ascii_uppercase


def round_half_up(x: float) -> int:
    # snap away float noise such as 44.99999999999999 before rounding
    return int(math.floor(round(x, 9) + 0.5))


@dataclass(frozen=True)
class VitalityIndex:
    letter: str
    numeric: int

    def __post_init__(self):
        if not 0 <= self.numeric <= 100:
            raise ValueError(f"numeric part {self.numeric} outside 0..100")
        if len(self.letter) != 1 or self.letter not in LETTERS:
            raise ValueError(f"bad cluster letter {self.letter!r}")

    def __str__(self) -> str:
        return format_vi(self)


def numeric_part(row: Sequence[float]) -> int:
    """round(100 * mean(row)), half up."""
    x = np.asarray(row, dtype=float)
    if x.size == 0:
        raise ValueError("empty feature row")
    if np.any(~np.isfinite(x)) or np.any((x < 0) | (x > 1)):
        raise ValueError("feature values must lie in [0, 1]")
    return min(100, max(0, round_half_up(100.0 * float(np.mean(x)))))


def assign_letters(assignments: Sequence[int], numerics: Sequence[float],
                   descending: bool = True) -> dict[int, str]:
    """Letter 'A' goes to the cluster with the highest mean numeric part.

    Equal means keep the lower original cluster index first. With
    ``descending=False`` 'A' is the least vital cluster instead.
    """
    assignments = np.asarray(assignments)
    numerics = np.asarray(numerics, dtype=float)
    if assignments.shape != numerics.shape:
        raise ValueError("assignments and numerics differ in length")
    clusters = sorted(set(assignments.tolist()))
    if len(clusters) > len(LETTERS):
        raise ValueError(f"{len(clusters)} clusters exceed the {len(LETTERS)} available letters")
    sign = -1.0 if descending else 1.0
    means = {c: float(numerics[assignments == c].mean()) for c in clusters}
    ranked = sorted(clusters, key=lambda c: (sign * means[c], c))
    return {c: LETTERS[i] for i, c in enumerate(ranked)}


def format_vi(v: VitalityIndex) -> str:
    return f"{v.letter}{v.numeric}"


@dataclass(frozen=True)
class TrendModel:
    district_id: str
    slope: float
    intercept: float
    n_points: int
    years_used: tuple[int, ...]
    # centre of the data; evaluating around it keeps far-off years accurate
    year_mean: float = 0.0
    value_mean: float = 0.0

    def value_at(self, year: float) -> float:
        return self.value_mean + self.slope * (year - self.year_mean)

    def to_dict(self) -> dict:
        return {
            "district_id": self.district_id,
            "slope": self.slope,
            "intercept": self.intercept,
            "n_points": self.n_points,
            "years_used": list(self.years_used),
            "year_mean": self.year_mean,
            "value_mean": self.value_mean,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrendModel":
        return cls(d["district_id"], float(d["slope"]), float(d["intercept"]), int(d["n_points"]),
                   tuple(d["years_used"]), float(d["year_mean"]), float(d["value_mean"]))


def fit_trend(points: Iterable[tuple[int, float]], district_id: str = "") -> TrendModel:
    """Ordinary least squares line through pooled (year, numeric) points."""
    pts = [(float(y), float(v)) for y, v in points]
    years = sorted({int(y) for y, _ in pts})
    if len(years) < 2:
        raise ValueError(
            f"district {district_id!r}: trend needs at least 2 distinct years, got {years}"
        )
    x = np.array([p[0] for p in pts])
    y = np.array([p[1] for p in pts])
    xm, ym = float(x.mean()), float(y.mean())
    dx = x - xm
    slope = float(np.dot(dx, y - ym) / np.dot(dx, dx))
    return TrendModel(district_id, slope, ym - slope * xm, len(pts), tuple(years), xm, ym)


def predict(t: TrendModel, target_year: int) -> tuple[int, bool]:
    """Rounded line value at ``target_year`` clamped to 0..100, plus a clamp flag."""
    value = round_half_up(t.value_at(target_year))
    clamped = min(100, max(0, value))
    return clamped, clamped != value


def district_points(records: Iterable[tuple[str, int, str]],
                    numerics: Mapping[tuple[str, int], float]) -> dict[str, list[tuple[int, float]]]:
    """Group (da_id, year, district_id) rows into per-district (year, numeric) points."""
    out: dict[str, list[tuple[int, float]]] = {}
    for da_id, year, district in records:
        if (da_id, year) in numerics:
            out.setdefault(district, []).append((year, numerics[(da_id, year)]))
    return {k: sorted(v) for k, v in sorted(out.items())}


def fit_districts(points: Mapping[str, list[tuple[int, float]]]):
    """Fit every district; returns (trends, errors) keyed by district id."""
    trends: dict[str, TrendModel] = {}
    errors: dict[str, str] = {}
    for district, pts in points.items():
        try:
            trends[district] = fit_trend(pts, district)
        except ValueError as exc:
            errors[district] = str(exc)
    return trends, errors


def prediction_rows(trends: Mapping[str, TrendModel], targets: Sequence[int]) -> list[dict]:
    """Flat table: fitted values at observed years, predictions at targets."""
    rows = []
    for district, t in sorted(trends.items()):
        years = [(y, "fitted") for y in t.years_used]
        years += [(y, "predicted") for y in sorted(set(targets)) if y not in t.years_used]
        for year, kind in years:
            value, clamped = predict(t, year)
            rows.append({
                "district_id": district,
                "slope": t.slope,
                "intercept": t.intercept,
                "year": year,
                "kind": kind,
                "numeric": value,
                "clamped": clamped,
            })
    return rows


PREDICTION_COLUMNS = ("district_id", "slope", "intercept", "year", "kind", "numeric", "clamped")


def prediction_csv(rows: Sequence[dict]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=PREDICTION_COLUMNS, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({**r, "slope": repr(r["slope"]), "intercept": repr(r["intercept"]),
                    "clamped": str(r["clamped"]).lower()})
    return buf.getvalue()
