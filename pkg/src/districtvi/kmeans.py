"""Lloyd's k-means with Forgy initialization and random restarts."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .seeding import rng_for


@dataclass(frozen=True)
class KMeansConfig:
    k: int
    n_init: int = 10
    max_iter: int = 300
    tol: float = 1e-6
    seed: int = 0

    def __post_init__(self):
        if self.k < 2:
            raise ValueError(f"k must be >= 2, got {self.k}")
        if self.n_init < 1:
            raise ValueError(f"n_init must be >= 1, got {self.n_init}")
        if self.max_iter < 1:
            raise ValueError(f"max_iter must be >= 1, got {self.max_iter}")
        if self.tol < 0:
            raise ValueError(f"tol must be non-negative, got {self.tol}")


@dataclass
class ClusteringResult:
    assignments: np.ndarray  # (n,) ints in 0..k-1
    centroids: np.ndarray  # (k, d)
    inertia: float
    n_iter: int
    restarts_run: int
    # final inertia of every restart, in restart order
    restart_inertias: list[float] = field(default_factory=list)
    # inertia after each (assign, update) step of the winning restart
    trace: list[float] = field(default_factory=list)

    @property
    def k(self) -> int:
        return len(self.centroids)

    def sizes(self) -> list[int]:
        return np.bincount(self.assignments, minlength=self.k).tolist()


def _as_array(m) -> np.ndarray:
    x = np.asarray(getattr(m, "values", m), dtype=float)
    if x.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {x.shape}")
    return x


def _sq_distances(x: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    diff = x[:, None, :] - centroids[None, :, :]
    return np.einsum("nkd,nkd->nk", diff, diff)


def inertia(m, assignments, centroids) -> float:
    """Sum of squared Euclidean distances from each point to its centroid."""
    x = _as_array(m)
    assignments = np.asarray(assignments)
    centroids = np.asarray(centroids, dtype=float)
    if assignments.shape != (x.shape[0],):
        raise ValueError(f"{len(assignments)} assignments for {x.shape[0]} points")
    if centroids.ndim != 2 or centroids.shape[1] != x.shape[1]:
        raise ValueError(f"centroids shape {centroids.shape} incompatible with data {x.shape}")
    if assignments.size and (assignments.min() < 0 or assignments.max() >= len(centroids)):
        raise ValueError("assignment refers to a missing centroid")
    diff = x - centroids[assignments]
    return float(np.sum(diff * diff))


def _repair_empty(x, labels, centroids, k) -> bool:
    """Give each empty cluster the point farthest from its own centroid.

    Only points in clusters with >= 2 members are eligible, so repairing never
    empties another cluster. Returns True when anything moved.
    """
    counts = np.bincount(labels, minlength=k)
    empty = np.flatnonzero(counts == 0)
    if empty.size == 0:
        return False
    dist = np.sum((x - centroids[labels]) ** 2, axis=1)
    for j in empty:
        eligible = counts[labels] > 1
        cand = np.where(eligible, dist, -np.inf)
        i = int(np.argmax(cand))
        counts[labels[i]] -= 1
        labels[i] = j
        counts[j] = 1
        centroids[j] = x[i]
        dist[i] = 0.0
    return True


def _update(x, labels, k) -> np.ndarray:
    sums = np.zeros((k, x.shape[1]))
    np.add.at(sums, labels, x)
    counts = np.bincount(labels, minlength=k)
    return sums / counts[:, None]


def lloyd(x: np.ndarray, k: int, max_iter: int, tol: float, rng: np.random.Generator):
    """One Lloyd run from k distinct random rows.

    Returns (labels, centroids, inertia, n_iter, trace).
    """
    n = x.shape[0]
    centroids = x[np.sort(rng.choice(n, size=k, replace=False))].copy()
    labels = None
    trace: list[float] = []
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        new = np.argmin(_sq_distances(x, centroids), axis=1)
        repaired = _repair_empty(x, new, centroids, k)
        if labels is not None and not repaired and np.array_equal(new, labels):
            n_iter -= 1
            break
        labels = new
        updated = _update(x, labels, k)
        shift = float(np.max(np.abs(updated - centroids)))
        centroids = updated
        trace.append(inertia(x, labels, centroids))
        if shift < tol:
            break
    # leave every point on its nearest centroid unless that would empty one
    final = np.argmin(_sq_distances(x, centroids), axis=1)
    if np.bincount(final, minlength=k).min() > 0 and not np.array_equal(final, labels):
        labels = final
        trace.append(inertia(x, labels, centroids))
    return labels, centroids, inertia(x, labels, centroids), n_iter, trace


def fit(m, cfg: KMeansConfig) -> ClusteringResult:
    """Best-of-``n_init`` Lloyd runs; inertia ties go to the earliest restart."""
    x = _as_array(m)
    n = x.shape[0]
    if n == 0:
        raise ValueError("cannot cluster an empty matrix")
    if cfg.k > n:
        raise ValueError(f"k={cfg.k} exceeds the number of rows ({n})")
    best = None
    restart_inertias = []
    for r in range(cfg.n_init):
        run = lloyd(x, cfg.k, cfg.max_iter, cfg.tol, rng_for(cfg.seed, "kmeans", r))
        restart_inertias.append(run[2])
        if best is None or run[2] < best[2]:
            best = run
    labels, centroids, j, n_iter, trace = best
    return ClusteringResult(
        assignments=labels,
        centroids=centroids,
        inertia=j,
        n_iter=n_iter,
        restarts_run=cfg.n_init,
        restart_inertias=restart_inertias,
        trace=trace,
    )
