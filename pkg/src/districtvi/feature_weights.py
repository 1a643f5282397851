"""Feature weights from exhaustive subset clustering and a random forest.

Every column subset with at least two features is clustered and scored by
silhouette. A forest of regression trees then learns score ~ subset mask,
and its mean decrease in impurity gives each feature a weight.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from . import kmeans
from .seeding import derive_seed, rng_for
from .silhouette import silhouette_score

MAX_SUBSET_FEATURES = 16


@dataclass(frozen=True)
class SubsetRun:
    mask: tuple[int, ...]  # feature ids, ascending
    score: float
    failed: bool = False

    def to_dict(self) -> dict:
        return {"mask": list(self.mask), "score": self.score, "failed": self.failed}

    @classmethod
    def from_dict(cls, d: dict) -> "SubsetRun":
        return cls(tuple(d["mask"]), float(d["score"]), bool(d.get("failed", False)))


def subset_masks(feature_ids: Sequence[int], min_size: int = 2) -> list[tuple[int, ...]]:
    """All subsets of at least ``min_size`` features, ordered by bitmask value."""
    ids = tuple(feature_ids)
    masks = []
    for bits in range(1, 1 << len(ids)):
        chosen = tuple(f for j, f in enumerate(ids) if bits >> j & 1)
        if len(chosen) >= min_size:
            masks.append(chosen)
    return masks


def enumerate_subsets(m, base: kmeans.KMeansConfig, min_size: int = 2) -> list[SubsetRun]:
    d = len(m.col_ids)
    if d > MAX_SUBSET_FEATURES:
        raise ValueError(f"{d} features would need 2^{d} clusterings (limit {MAX_SUBSET_FEATURES})")
    runs = []
    for mask in subset_masks(m.col_ids, min_size):
        sub = m.columns(mask)
        bits = sum(1 << m.col_ids.index(f) for f in mask)
        cfg = kmeans.KMeansConfig(k=base.k, n_init=base.n_init, max_iter=base.max_iter,
                                  tol=base.tol, seed=derive_seed(base.seed, "subset", bits))
        try:
            res = kmeans.fit(sub, cfg)
            runs.append(SubsetRun(mask, silhouette_score(sub, res.assignments)))
        except ValueError:
            runs.append(SubsetRun(mask, -1.0, failed=True))
    return runs


def mask_matrix(runs: Sequence[SubsetRun], feature_ids: Sequence[int]) -> np.ndarray:
    return np.array([[1.0 if f in r.mask else 0.0 for f in feature_ids] for r in runs])


# -- regression tree -------------------------------------------------------

@dataclass
class _Node:
    value: float
    n: int
    feature: int = -1
    threshold: float = math.nan
    left: Optional["_Node"] = None
    right: Optional["_Node"] = None

    @property
    def is_leaf(self) -> bool:
        return self.left is None


class RegressionTree:
    """CART regressor splitting on maximal variance (squared-error) reduction.

    Ties between candidate splits go to the lowest feature index, then the
    lowest threshold.
    """

    def __init__(self, max_depth=None, min_samples_leaf=1, max_features=None, rng=None):
        self.max_depth = max_depth
        self.min_samples_leaf = min_samples_leaf
        self.max_features = max_features
        self.rng = rng if rng is not None else np.random.default_rng(0)
        self.root: Optional[_Node] = None
        self.importance_: Optional[np.ndarray] = None

    def fit(self, X, y):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        self.n_features_ = X.shape[1]
        self.importance_ = np.zeros(self.n_features_)
        self._n_total = len(y)
        self.root = self._grow(X, y, 0)
        return self

    def _best_split(self, X, y):
        n, d = X.shape
        k = d if self.max_features is None else min(self.max_features, d)
        candidates = np.sort(self.rng.choice(d, size=k, replace=False)) if k < d else range(d)
        total_sse = float(np.sum((y - y.mean()) ** 2))
        best = None  # (gain, feature, threshold)
        leaf = self.min_samples_leaf
        for f in candidates:
            order = np.argsort(X[:, f], kind="stable")
            xs, ys = X[order, f], y[order]
            csum = np.cumsum(ys)
            csq = np.cumsum(ys * ys)
            tot, totsq = csum[-1], csq[-1]
            pos = np.arange(leaf - 1, n - leaf)
            pos = pos[xs[pos] != xs[pos + 1]]
            if pos.size == 0:
                continue
            nl = pos + 1.0
            nr = n - nl
            sl = csum[pos]
            sr = tot - sl
            sse = (csq[pos] - sl * sl / nl) + ((totsq - csq[pos]) - sr * sr / nr)
            gains = total_sse - sse
            # first position of the maximum = lowest threshold among ties
            i = int(np.argmax(gains >= gains.max() - 1e-12 * max(1.0, total_sse)))
            gain = float(gains[i])
            thr = 0.5 * (xs[pos[i]] + xs[pos[i] + 1])
            if best is None or gain > best[0] + 1e-12 * max(1.0, total_sse):
                best = (gain, int(f), float(thr))
        return best, total_sse

    def _grow(self, X, y, depth) -> _Node:
        node = _Node(value=float(y.mean()), n=len(y))
        if (self.max_depth is not None and depth >= self.max_depth) \
                or len(y) < 2 * self.min_samples_leaf or np.all(y == y[0]):
            return node
        best, total_sse = self._best_split(X, y)
        if best is None or best[0] <= 1e-15 * max(1.0, total_sse):
            return node
        gain, f, thr = best
        mask = X[:, f] <= thr
        node.feature, node.threshold = f, thr
        # gain is n * (parent variance) - weighted child variances
        self.importance_[f] += gain / self._n_total
        node.left = self._grow(X[mask], y[mask], depth + 1)
        node.right = self._grow(X[~mask], y[~mask], depth + 1)
        return node

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        out = np.empty(len(X))
        for i, row in enumerate(X):
            node = self.root
            while not node.is_leaf:
                node = node.left if row[node.feature] <= node.threshold else node.right
            out[i] = node.value
        return out

    def depth(self) -> int:
        def _d(node):
            return 0 if node.is_leaf else 1 + max(_d(node.left), _d(node.right))
        return _d(self.root)


# -- forest ----------------------------------------------------------------

@dataclass(frozen=True)
class ForestConfig:
    n_trees: int = 250
    max_depth: Optional[int] = None
    min_samples_leaf: int = 1
    bootstrap: bool = True
    # int, "all", or None for ceil(d / 3)
    features_per_split: Union[int, str, None] = None
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1:
            raise ValueError("n_trees must be >= 1")
        if self.min_samples_leaf < 1:
            raise ValueError("min_samples_leaf must be >= 1")

    def resolve_features(self, d: int) -> int:
        if self.features_per_split is None:
            return max(1, math.ceil(d / 3))
        if self.features_per_split == "all":
            return d
        return max(1, min(int(self.features_per_split), d))


@dataclass
class Forest:
    trees: list[RegressionTree]
    feature_ids: tuple[int, ...]
    degenerate: bool = False

    def predict(self, X) -> np.ndarray:
        return np.mean([t.predict(X) for t in self.trees], axis=0)


def fit_forest(runs: Sequence[SubsetRun], cfg: ForestConfig = ForestConfig(),
               feature_ids: Optional[Sequence[int]] = None) -> Forest:
    if len(runs) < 2:
        raise ValueError("need at least 2 subset runs to fit a forest")
    if feature_ids is None:
        feature_ids = sorted({f for r in runs for f in r.mask})
    feature_ids = tuple(feature_ids)
    X = mask_matrix(runs, feature_ids)
    y = np.array([r.score for r in runs], dtype=float)
    n, d = X.shape
    k = cfg.resolve_features(d)
    trees = []
    for t in range(cfg.n_trees):
        rng = rng_for(cfg.seed, "tree", t)
        idx = rng.integers(0, n, size=n) if cfg.bootstrap else np.arange(n)
        tree = RegressionTree(cfg.max_depth, cfg.min_samples_leaf, k if k < d else None, rng)
        trees.append(tree.fit(X[idx], y[idx]))
    return Forest(trees, feature_ids, degenerate=bool(np.all(y == y[0])))


@dataclass
class FeatureWeights:
    feature_ids: tuple[int, ...]
    weights: np.ndarray  # aligned with feature_ids
    ordering: tuple[int, ...] = field(init=False)

    def __post_init__(self):
        self.feature_ids = tuple(self.feature_ids)
        self.weights = np.asarray(self.weights, dtype=float)
        # descending weight, ties by feature id
        self.ordering = tuple(
            f for _, f in sorted(zip(-self.weights, self.feature_ids))
        )

    def weight(self, feature_id: int) -> float:
        return float(self.weights[self.feature_ids.index(feature_id)])

    def ranked(self, names: Optional[dict] = None) -> list[dict]:
        names = names or {}
        return [
            {"rank": r, "feature": f, "name": names.get(f, f"feature {f}"), "weight": self.weight(f)}
            for r, f in enumerate(self.ordering, start=1)
        ]

    def format_table(self, names: Optional[dict] = None) -> str:
        lines = []
        for row in self.ranked(names):
            lines.append(f"{row['rank']}. feature {row['feature']} ({row['weight']:.6f}) {row['name']}")
        return "\n".join(lines)

    def to_dict(self, names: Optional[dict] = None) -> dict:
        return {
            "feature_ids": list(self.feature_ids),
            "weights": [float(w) for w in self.weights],
            "ordering": list(self.ordering),
            "ranked": self.ranked(names),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureWeights":
        return cls(tuple(d["feature_ids"]), d["weights"])


def importances(f: Forest) -> FeatureWeights:
    """Mean decrease in impurity, normalized per tree, averaged, normalized again."""
    d = len(f.feature_ids)
    total = np.zeros(d)
    for tree in f.trees:
        imp = tree.importance_
        s = imp.sum()
        if s > 0:
            total += imp / s
    if total.sum() <= 0:
        return FeatureWeights(f.feature_ids, np.full(d, 1.0 / d))
    return FeatureWeights(f.feature_ids, total / total.sum())
