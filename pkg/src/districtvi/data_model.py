"""Dataset schema, CSV loading and validation.

CSV layout: ``da_id, year, district_id, f<id>...`` with one column per
configured feature, UTF-8, ``.`` as decimal separator and an empty cell for a
missing value.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

ImputeStrategy = Union[str, float]

BASE_COLUMNS = ("da_id", "year", "district_id")


class DataError(ValueError):
    """Raised when a dataset file or feature configuration cannot be parsed."""


@dataclass(frozen=True)
class FeatureSpec:
    id: int
    name: str
    log_scale: bool = False
    invert: bool = False
    # "mean" or a constant fill value
    impute: ImputeStrategy = "mean"

    def __post_init__(self):
        if self.impute != "mean" and not isinstance(self.impute, (int, float)):
            raise DataError(f"feature {self.id}: impute must be 'mean' or a number")
        if isinstance(self.impute, bool):
            raise DataError(f"feature {self.id}: impute must be 'mean' or a number")

    @property
    def column(self) -> str:
        return f"f{self.id}"

    def to_dict(self) -> dict:
        impute = self.impute if self.impute == "mean" else {"constant": float(self.impute)}
        return {
            "id": self.id,
            "name": self.name,
            "log_scale": self.log_scale,
            "invert": self.invert,
            "impute": impute,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureSpec":
        try:
            impute = d.get("impute", "mean")
            if isinstance(impute, dict):
                impute = float(impute["constant"])
            return cls(
                id=int(d["id"]),
                name=str(d["name"]),
                log_scale=bool(d.get("log_scale", False)),
                invert=bool(d.get("invert", False)),
                impute=impute,
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"bad feature spec {d!r}: {exc}") from exc


# The eight Trois-Rivieres features. The log/invert flags are assumptions:
# counts and money values are log-scaled, "higher is worse" rates are inverted.
DEFAULT_FEATURES: tuple[FeatureSpec, ...] = (
    FeatureSpec(1, "Major renovation permit", log_scale=True),
    FeatureSpec(2, "Proportion of dwelling requiring major repairs", invert=True),
    FeatureSpec(3, "Proportion of dwelling requiring minor repairs", invert=True),
    FeatureSpec(4, "Material deprivation index", invert=True),
    FeatureSpec(5, "Social deprivation index", invert=True),
    FeatureSpec(6, "Average value of single-family homes", log_scale=True),
    FeatureSpec(7, "Median value per dwelling", log_scale=True),
    FeatureSpec(8, "Housing vacancy rate", invert=True),
)


@dataclass(frozen=True)
class DARecord:
    """Raw feature values of one dissemination area for one year."""

    da_id: str
    year: int
    district_id: str
    raw: tuple[Optional[float], ...]

    @property
    def key(self) -> tuple[str, int]:
        return (self.da_id, self.year)


@dataclass(frozen=True)
class Dataset:
    records: tuple[DARecord, ...]
    specs: tuple[FeatureSpec, ...]
    years: tuple[int, ...] = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))
        object.__setattr__(self, "specs", tuple(self.specs))
        object.__setattr__(self, "years", tuple(sorted({r.year for r in self.records})))

    @property
    def feature_ids(self) -> tuple[int, ...]:
        return tuple(s.id for s in self.specs)

    def spec(self, feature_id: int) -> FeatureSpec:
        for s in self.specs:
            if s.id == feature_id:
                return s
        raise KeyError(feature_id)

    def records_for_year(self, year: int) -> list[DARecord]:
        return [r for r in self.records if r.year == year]

    def districts(self) -> dict[str, list[str]]:
        """District id -> sorted DA ids, over all years."""
        out: dict[str, set] = {}
        for r in self.records:
            out.setdefault(r.district_id, set()).add(r.da_id)
        return {k: sorted(v) for k, v in sorted(out.items())}


def load_feature_specs(path: Union[str, Path]) -> tuple[FeatureSpec, ...]:
    """Read a JSON list of feature specs (``{"features": [...]}`` also accepted)."""
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, UnicodeDecodeError) as exc:
        raise DataError(f"cannot read feature config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"feature config {path} is not valid JSON: {exc}") from exc
    if isinstance(doc, dict):
        doc = doc.get("features")
    if not isinstance(doc, list) or not doc:
        raise DataError("feature config must be a non-empty list of feature specs")
    specs = tuple(FeatureSpec.from_dict(d) for d in doc)
    ids = [s.id for s in specs]
    if len(set(ids)) != len(ids):
        raise DataError(f"duplicate feature ids in config: {ids}")
    return specs


def dump_feature_specs(specs: Sequence[FeatureSpec]) -> str:
    return json.dumps({"features": [s.to_dict() for s in specs]}, indent=2)


def _parse_cell(text: str, where: str) -> Optional[float]:
    text = text.strip()
    if text == "":
        return None
    try:
        value = float(text)
    except ValueError:
        raise DataError(f"{where}: non-numeric value {text!r}") from None
    if not math.isfinite(value):
        raise DataError(f"{where}: non-finite value {text!r}")
    return value


def parse_dataset(text: str, specs: Sequence[FeatureSpec] = DEFAULT_FEATURES,
                  allow_duplicates: bool = False) -> Dataset:
    specs = tuple(specs)
    expected = list(BASE_COLUMNS) + [s.column for s in specs]
    try:
        rows = list(csv.reader(io.StringIO(text, newline="")))
    except csv.Error as exc:
        raise DataError(f"CSV syntax error: {exc}") from exc
    rows = [r for r in rows if r and any(c.strip() for c in r)]
    if not rows:
        raise DataError("empty file: missing header row")
    header = [c.strip() for c in rows[0]]
    if header and header[0].startswith("\ufeff"):
        header[0] = header[0][1:]
    if header != expected:
        raise DataError(f"header {header} does not match expected columns {expected}")

    records = []
    seen: set[tuple[str, int]] = set()
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(expected):
            raise DataError(
                f"line {lineno}: expected {len(expected)} columns, got {len(row)}"
            )
        da_id, year_txt, district = (c.strip() for c in row[:3])
        try:
            year = int(year_txt)
        except ValueError:
            raise DataError(f"line {lineno}: bad year {year_txt!r}") from None
        raw = tuple(
            _parse_cell(cell, f"line {lineno}, column {spec.column}")
            for cell, spec in zip(row[3:], specs)
        )
        key = (da_id, year)
        if key in seen and not allow_duplicates:
            raise DataError(f"line {lineno}: duplicate record (da_id={da_id!r}, year={year})")
        seen.add(key)
        records.append(DARecord(da_id, year, district, raw))
    return Dataset(tuple(records), specs)


def load_dataset(csv_path: Union[str, Path], config: Sequence[FeatureSpec] = DEFAULT_FEATURES,
                 allow_duplicates: bool = False) -> Dataset:
    """Load a dataset CSV. Raises DataError for anything malformed.

    ``allow_duplicates`` keeps repeated (da_id, year) rows so that
    :func:`validate` can report them instead of failing the load.
    """
    try:
        data = Path(csv_path).read_bytes()
    except OSError as exc:
        raise DataError(f"cannot read {csv_path}: {exc}") from exc
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise DataError(f"{csv_path} is not UTF-8: {exc}") from exc
    if "\x00" in text:
        raise DataError(f"{csv_path}: NUL byte in input")
    return parse_dataset(text, config, allow_duplicates)


def format_dataset(ds: Dataset) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(list(BASE_COLUMNS) + [s.column for s in ds.specs])
    for r in ds.records:
        writer.writerow(
            [r.da_id, r.year, r.district_id] + ["" if v is None else repr(float(v)) for v in r.raw]
        )
    return buf.getvalue()


def save_dataset(ds: Dataset, csv_path: Union[str, Path]) -> None:
    Path(csv_path).write_text(format_dataset(ds), encoding="utf-8")


def validate(ds: Dataset) -> list[str]:
    """Return one line per invariant violation; an empty list means clean."""
    issues = []
    ids = [s.id for s in ds.specs]
    if len(set(ids)) != len(ids):
        issues.append(f"feature specs: duplicate ids {ids}")
    if not ds.records:
        issues.append("dataset: no records (years is empty)")
    seen: set[tuple[str, int]] = set()
    for i, r in enumerate(ds.records):
        label = f"record {i} (da_id={r.da_id!r}, year={r.year})"
        if not r.da_id:
            issues.append(f"{label}: field da_id is empty")
        if not r.district_id:
            issues.append(f"{label}: field district_id is empty")
        if len(r.raw) != len(ds.specs):
            issues.append(f"{label}: field raw has {len(r.raw)} values, expected {len(ds.specs)}")
        for spec, v in zip(ds.specs, r.raw):
            if v is None:
                continue
            if not math.isfinite(v):
                issues.append(f"{label}: field {spec.column} is not finite")
            elif spec.log_scale and v < 0:
                issues.append(f"{label}: field {spec.column} is negative but log-scaled")
        if r.key in seen:
            issues.append(f"{label}: duplicate (da_id, year)")
        seen.add(r.key)
    for spec in ds.specs:
        if spec.impute != "mean":
            continue
        j = ds.specs.index(spec)
        for year in ds.years:
            col = [r.raw[j] for r in ds.records if r.year == year and len(r.raw) == len(ds.specs)]
            if col and all(v is None for v in col):
                issues.append(f"year {year}: field {spec.column} has no values to impute a mean from")
    return issues


def advisories(ds: Dataset) -> list[str]:
    """Non-fatal remarks about what the dataset can support."""
    notes = []
    if len(ds.years) == 1:
        notes.append(
            f"only one year ({ds.years[0]}) present: trend prediction needs at least 2 years"
        )
    return notes
