"""Synthetic data with planted structure, for demos and tests."""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .data_model import DEFAULT_FEATURES, DARecord, Dataset, FeatureSpec
from .preprocess import FeatureMatrix


def separated_centers(k: int, d: int, rng: np.random.Generator, min_gap: float) -> np.ndarray:
    """k points in [0.1, 0.9]^d with pairwise distance >= min_gap (rejection sampling)."""
    for _ in range(10_000):
        c = rng.uniform(0.1, 0.9, size=(k, d))
        gaps = np.linalg.norm(c[:, None] - c[None, :], axis=2)
        if np.all(gaps[np.triu_indices(k, 1)] >= min_gap):
            return c
    raise ValueError(f"could not place {k} centers {min_gap} apart in {d} dimensions")


# A regular 4-simplex (5 equidistant centers) under a fixed rotation, scaled
# into [0.1, 0.9]^4. Unlike the axis-aligned simplex, no projection onto 2 or 3
# of the coordinates collapses two centers onto each other, so clustering on
# all four columns is clearly the best-scoring choice.
ROTATED_SIMPLEX = np.array([
    [0.3157, 0.7436, 0.2368, 0.6201],
    [0.3373, 0.1195, 0.4536, 0.5400],
    [0.9000, 0.4666, 0.3745, 0.5407],
    [0.4925, 0.5979, 0.8556, 0.7098],
    [0.4651, 0.5830, 0.5901, 0.1000],
])


def planted_blobs(
    k: int = 5,
    n_per_cluster: int = 20,
    n_informative: int = 4,
    n_noise: int = 4,
    spread: float = 0.03,
    min_gap: float = 0.45,
    layout: str = "random",
    seed: int = 0,
):
    """Gaussian blobs on the first ``n_informative`` columns, uniform noise on the rest.

    ``layout="simplex"`` uses ROTATED_SIMPLEX (k=5, 4 informative columns);
    ``"random"`` places the centers at least ``min_gap`` apart. Returns (FeatureMatrix, true_labels); columns are feature ids 1..d.
    """
    rng = np.random.default_rng(seed)
    if layout == "simplex":
        if (k, n_informative) != ROTATED_SIMPLEX.shape:
            raise ValueError("simplex layout needs k=5 and 4 informative columns")
        centers = ROTATED_SIMPLEX
    else:
        centers = separated_centers(k, n_informative, rng, min_gap)
    labels = np.repeat(np.arange(k), n_per_cluster)
    informative = centers[labels] + rng.normal(0.0, spread, size=(len(labels), n_informative))
    noise = rng.uniform(0.0, 1.0, size=(len(labels), n_noise))
    x = np.clip(np.hstack([informative, noise]), 0.0, 1.0)
    rows = tuple((f"P{i:04d}", 0) for i in range(len(labels)))
    cols = tuple(range(1, n_informative + n_noise + 1))
    return FeatureMatrix(x, rows, cols), labels


# raw-value scale per canonical feature: (low, high) of the untransformed value
_RAW_RANGES = {
    1: (0.0, 60.0),          # permits per year
    2: (0.0, 0.15),          # share needing major repairs
    3: (0.0, 0.30),          # share needing minor repairs
    4: (-0.05, 0.08),        # material deprivation score
    5: (-0.05, 0.08),        # social deprivation score
    6: (90_000.0, 450_000.0),
    7: (70_000.0, 380_000.0),
    8: (0.0, 0.12),          # vacancy rate
}


def _to_raw(quality: float, spec: FeatureSpec) -> float:
    """Map a latent quality in [0, 1] (1 = better) to a raw value for ``spec``."""
    lo, hi = _RAW_RANGES.get(spec.id, (0.0, 1.0))
    q = 1.0 - quality if spec.invert else quality
    if spec.log_scale:
        return float(np.expm1(math.log1p(lo) + q * (math.log1p(hi) - math.log1p(lo))))
    return lo + q * (hi - lo)


def make_panel(
    n_da: int = 135,
    years: Sequence[int] = (2006, 2011, 2016),
    n_profiles: int = 6,
    das_per_district: int = 5,
    missing_rate: float = 0.01,
    specs: Sequence[FeatureSpec] = DEFAULT_FEATURES,
    seed: int = 0,
) -> Dataset:
    """A city-like panel: DAs drawn from latent profiles, grouped in districts
    that drift linearly over the years."""
    rng = np.random.default_rng(seed)
    d = len(specs)
    profiles = separated_centers(n_profiles, d, rng, min_gap=0.5)
    member = rng.integers(0, n_profiles, size=n_da)
    base = np.clip(profiles[member] + rng.normal(0, 0.06, size=(n_da, d)), 0.0, 1.0)
    district = [f"TR-{i // das_per_district + 1}" for i in range(n_da)]
    n_districts = math.ceil(n_da / das_per_district)
    drift = rng.normal(0.0, 0.006, size=n_districts)  # quality change per year
    y0 = min(years)
    records = []
    for i in range(n_da):
        da_id = f"{24370000 + 100 * i}"
        dist_idx = i // das_per_district
        for year in years:
            q = np.clip(base[i] + drift[dist_idx] * (year - y0) + rng.normal(0, 0.01, size=d), 0.0, 1.0)
            raw = []
            for j, spec in enumerate(specs):
                if rng.random() < missing_rate:
                    raw.append(None)
                else:
                    raw.append(round(_to_raw(float(q[j]), spec), 6))
            records.append(DARecord(da_id, int(year), district[i], tuple(raw)))
    return Dataset(tuple(records), tuple(specs))
