"""Slow, obviously-correct reference implementations used only by tests.

Nothing here imports the package's numerical code.
"""

from __future__ import annotations

import itertools
import math

import numpy as np


def silhouette_bruteforce(points, labels):
    """Per-point silhouette from explicit pairwise loops."""
    n = len(points)
    clusters = sorted(set(labels))
    out = []
    for i in range(n):
        own = [j for j in range(n) if labels[j] == labels[i]]
        if len(own) == 1:
            out.append(0.0)
            continue
        a = sum(math.dist(points[i], points[j]) for j in own if j != i) / (len(own) - 1)
        b = math.inf
        for c in clusters:
            if c == labels[i]:
                continue
            members = [j for j in range(n) if labels[j] == c]
            b = min(b, sum(math.dist(points[i], points[j]) for j in members) / len(members))
        m = max(a, b)
        out.append(0.0 if m == 0 else (b - a) / m)
    return out


def inertia_bruteforce(points, labels, centroids):
    total = 0.0
    for p, lab in zip(points, labels):
        total += sum((pi - ci) ** 2 for pi, ci in zip(p, centroids[lab]))
    return total


def best_partition(points, k):
    """Exhaustive search over all labelings with k non-empty clusters."""
    pts = np.asarray(points, dtype=float)
    best = (math.inf, None)
    for labels in itertools.product(range(k), repeat=len(pts)):
        if len(set(labels)) != k or labels[0] != 0:
            continue
        cents = [pts[[i for i, l in enumerate(labels) if l == c]].mean(axis=0) for c in range(k)]
        j = inertia_bruteforce(pts.tolist(), labels, [c.tolist() for c in cents])
        if j < best[0]:
            best = (j, labels)
    return best


def ols_normal_equations(points):
    """(slope, intercept) by solving X'X b = X'y with X = [1, year]."""
    X = np.array([[1.0, float(x)] for x, _ in points])
    y = np.array([float(v) for _, v in points])
    b = np.linalg.solve(X.T @ X, X.T @ y)
    return float(b[1]), float(b[0])


def variance_reduction(x_col, y):
    """Total squared-error drop from splitting binary column x_col at 0.5."""
    y = np.asarray(y, dtype=float)
    left = y[np.asarray(x_col) < 0.5]
    right = y[np.asarray(x_col) >= 0.5]

    def sse(v):
        return float(((v - v.mean()) ** 2).sum()) if len(v) else 0.0

    return sse(y) - sse(left) - sse(right)


def ols_exact(points):
    """(slope, intercept) from the normal equations solved in exact rationals."""
    from fractions import Fraction

    xs = [Fraction(int(x)) for x, _ in points]
    ys = [Fraction(float(v)) for _, v in points]
    n = len(xs)
    sx, sy = sum(xs), sum(ys)
    sxx = sum(x * x for x in xs)
    sxy = sum(x * y for x, y in zip(xs, ys))
    det = n * sxx - sx * sx
    slope = (n * sxy - sx * sy) / det
    intercept = (sxx * sy - sx * sxy) / det
    return float(slope), float(intercept)


def same_partition(a, b):
    """True when two labelings group the points identically."""
    pairs = set(zip(a, b))
    return len(pairs) == len(set(a)) == len(set(b))
