"""Silhouette values per point and their mean."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class SilhouetteReport:
    per_point: np.ndarray
    labels: list[int]  # distinct cluster labels, ascending
    per_cluster_sorted: list[list[float]]  # one ascending list per label
    mean_score: float

    def to_dict(self) -> dict:
        return {
            "per_point": [float(v) for v in self.per_point],
            "labels": list(self.labels),
            "per_cluster_sorted": [list(map(float, c)) for c in self.per_cluster_sorted],
            "mean_score": float(self.mean_score),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SilhouetteReport":
        return cls(
            per_point=np.asarray(d["per_point"], dtype=float),
            labels=list(d["labels"]),
            per_cluster_sorted=[list(c) for c in d["per_cluster_sorted"]],
            mean_score=float(d["mean_score"]),
        )


def _check(x: np.ndarray, assignments: np.ndarray) -> np.ndarray:
    if assignments.shape != (x.shape[0],):
        raise ValueError(f"{assignments.size} assignments for {x.shape[0]} points")
    labels = np.unique(assignments)
    if labels.size < 2:
        raise ValueError("silhouette needs at least 2 distinct clusters")
    return labels


def silhouette_samples(m, assignments) -> SilhouetteReport:
    """s(i) = (b - a) / max(a, b); 0 for members of singleton clusters.

    a(i) averages Euclidean distance to the other members of i's cluster
    (divisor |C| - 1); b(i) is the smallest mean distance to another cluster.
    """
    x = np.asarray(getattr(m, "values", m), dtype=float)
    assignments = np.asarray(assignments)
    labels = _check(x, assignments)

    diff = x[:, None, :] - x[None, :, :]
    dist = np.sqrt(np.einsum("ijd,ijd->ij", diff, diff))

    onehot = (assignments[:, None] == labels[None, :]).astype(float)
    sizes = onehot.sum(axis=0)
    sums = dist @ onehot  # (n, k): total distance from each point to each cluster
    own = np.searchsorted(labels, assignments)
    idx = np.arange(x.shape[0])
    own_size = sizes[own]

    a = np.where(own_size > 1, sums[idx, own] / np.maximum(own_size - 1, 1), 0.0)
    means = sums / sizes[None, :]
    means[idx, own] = np.inf
    b = means.min(axis=1)
    denom = np.maximum(a, b)
    with np.errstate(invalid="ignore", divide="ignore"):
        s = np.where((own_size > 1) & (denom > 0), (b - a) / denom, 0.0)
    s = np.clip(s, -1.0, 1.0)

    per_cluster = [sorted(s[assignments == lab].tolist()) for lab in labels]
    return SilhouetteReport(
        per_point=s,
        labels=labels.tolist(),
        per_cluster_sorted=per_cluster,
        mean_score=float(np.mean(s)),
    )


def silhouette_score(m, assignments) -> float:
    return silhouette_samples(m, assignments).mean_score
