"""Genetic search over k-means configurations, scored by silhouette.

A chromosome carries four genes: restart count, iteration cap, cluster
count and the set of feature columns to cluster on.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import kmeans
from .seeding import derive_seed, rng_for
from .silhouette import silhouette_score

log = logging.getLogger(__name__)

GENES = ("n_init", "max_iter", "k", "feature_mask")
FAILED_FITNESS = -1.0


@dataclass(frozen=True)
class Chromosome:
    n_init: int
    max_iter: int
    k: int
    feature_mask: tuple[int, ...]  # sorted feature ids

    def to_dict(self) -> dict:
        return {
            "n_init": self.n_init,
            "max_iter": self.max_iter,
            "k": self.k,
            "feature_mask": list(self.feature_mask),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Chromosome":
        return cls(int(d["n_init"]), int(d["max_iter"]), int(d["k"]),
                   tuple(int(f) for f in d["feature_mask"]))

    def describe(self) -> str:
        feats = ", ".join(str(f) for f in self.feature_mask)
        return (f"N_init={self.n_init}, Max_iter={self.max_iter}, "
                f"{self.k} clusters, features [{feats}]")


@dataclass(frozen=True)
class GeneRanges:
    n_init: tuple[int, int] = (2, 20)
    max_iter: tuple[int, int] = (50, 300)
    k: tuple[int, int] = (2, 12)

    def __post_init__(self):
        for name in ("n_init", "max_iter", "k"):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise ValueError(f"empty range for {name}: {lo}..{hi}")
        if self.n_init[0] < 1 or self.max_iter[0] < 1 or self.k[0] < 2:
            raise ValueError("ranges need n_init >= 1, max_iter >= 1, k >= 2")


@dataclass(frozen=True)
class GAConfig:
    generations: int = 50
    population: int = 40
    mutation_rate: float = 0.1
    breed_fraction: float = 0.5
    ranges: GeneRanges = field(default_factory=GeneRanges)
    fixed_k: Optional[int] = None
    fixed_mask: Optional[tuple[int, ...]] = None
    # mutate by redrawing the whole chromosome instead of single genes
    reinit_whole: bool = False
    min_features: int = 2
    seed: int = 0

    def __post_init__(self):
        if self.generations < 1:
            raise ValueError("generations must be >= 1")
        if self.population < 2:
            raise ValueError("population must be >= 2")
        if not 0.0 <= self.mutation_rate <= 1.0:
            raise ValueError("mutation_rate must be in [0, 1]")
        if not 0.0 < self.breed_fraction <= 1.0:
            raise ValueError("breed_fraction must be in (0, 1]")
        if self.fixed_k is not None and self.fixed_k < 2:
            raise ValueError("fixed_k must be >= 2")
        if self.fixed_mask is not None:
            object.__setattr__(self, "fixed_mask", tuple(sorted(self.fixed_mask)))
            if len(set(self.fixed_mask)) < self.min_features:
                raise ValueError(f"fixed_mask needs at least {self.min_features} features")

    @property
    def k_range(self) -> tuple[int, int]:
        if self.fixed_k is not None:
            return (self.fixed_k, self.fixed_k)
        return self.ranges.k


@dataclass
class GAHistory:
    max_fitness: list[float] = field(default_factory=list)
    mean_fitness: list[float] = field(default_factory=list)
    best: Optional[Chromosome] = None
    best_fitness: float = -math.inf
    evaluations: int = 0

    def to_dict(self) -> dict:
        return {
            "generations": [
                {"generation": g, "max_fitness": mx, "mean_fitness": mn}
                for g, (mx, mn) in enumerate(zip(self.max_fitness, self.mean_fitness))
            ],
            "best": None if self.best is None else self.best.to_dict(),
            "best_fitness": self.best_fitness,
            "evaluations": self.evaluations,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GAHistory":
        gens = d.get("generations", [])
        return cls(
            max_fitness=[float(g["max_fitness"]) for g in gens],
            mean_fitness=[float(g["mean_fitness"]) for g in gens],
            best=None if d.get("best") is None else Chromosome.from_dict(d["best"]),
            best_fitness=float(d["best_fitness"]),
            evaluations=int(d.get("evaluations", 0)),
        )


def evaluate_fitness(c: Chromosome, m, seed: int = 0) -> float:
    """Silhouette of a k-means clustering on the chromosome's columns.

    Raises on invalid input (unknown features, k not below the row count); the
    GA loop turns those into FAILED_FITNESS. k equal to the row count is
    rejected too: every row would be its own cluster.
    """
    if c.k >= m.shape[0]:
        raise ValueError(f"k={c.k} leaves no room for clustering {m.shape[0]} rows")
    sub = m.columns(c.feature_mask)
    cfg = kmeans.KMeansConfig(k=c.k, n_init=c.n_init, max_iter=c.max_iter, seed=seed)
    res = kmeans.fit(sub, cfg)
    return silhouette_score(sub, res.assignments)


class _Sampler:
    def __init__(self, cfg: GAConfig, feature_ids, rng: np.random.Generator):
        self.cfg = cfg
        self.features = tuple(sorted(feature_ids))
        self.rng = rng
        if cfg.fixed_mask is None and len(self.features) < cfg.min_features:
            raise ValueError(
                f"need at least {cfg.min_features} features, matrix has {len(self.features)}"
            )
        if cfg.fixed_mask is not None:
            unknown = set(cfg.fixed_mask) - set(self.features)
            if unknown:
                raise ValueError(f"fixed_mask refers to unknown features {sorted(unknown)}")

    def _int(self, bounds) -> int:
        lo, hi = bounds
        return int(self.rng.integers(lo, hi + 1))

    def gene(self, name: str):
        cfg = self.cfg
        if name == "n_init":
            return self._int(cfg.ranges.n_init)
        if name == "max_iter":
            return self._int(cfg.ranges.max_iter)
        if name == "k":
            return self._int(cfg.k_range)
        if cfg.fixed_mask is not None:
            return cfg.fixed_mask
        while True:
            bits = self.rng.random(len(self.features)) < 0.5
            if bits.sum() >= cfg.min_features:
                return tuple(f for f, b in zip(self.features, bits) if b)

    def chromosome(self) -> Chromosome:
        return Chromosome(*(self.gene(g) for g in GENES))


def init_population(cfg: GAConfig, feature_ids, rng: Optional[np.random.Generator] = None) -> list[Chromosome]:
    """Generation 0: every gene drawn uniformly over its range."""
    if rng is None:
        rng = rng_for(cfg.seed, "ga", "init")
    sampler = _Sampler(cfg, feature_ids, rng)
    return [sampler.chromosome() for _ in range(cfg.population)]


def _cross_masks(a: tuple, b: tuple, sampler: _Sampler) -> tuple:
    """Each feature's in/out bit comes from a randomly chosen parent."""
    if sampler.cfg.fixed_mask is not None or a == b:
        return a
    take_a = sampler.rng.random(len(sampler.features)) < 0.5
    child = tuple(f for f, ta in zip(sampler.features, take_a) if (f in a if ta else f in b))
    if len(child) < sampler.cfg.min_features:
        return a if sampler.rng.random() < 0.5 else b
    return child


def _breed(parents: list[Chromosome], sampler: _Sampler) -> Chromosome:
    rng = sampler.rng
    i, j = rng.integers(0, len(parents), size=2)
    pair = (parents[i], parents[j])
    genes = {g: getattr(pair[int(rng.integers(0, 2))], g) for g in GENES[:3]}
    genes["feature_mask"] = _cross_masks(pair[0].feature_mask, pair[1].feature_mask, sampler)
    cfg = sampler.cfg
    if cfg.reinit_whole:
        if rng.random() < cfg.mutation_rate:
            return sampler.chromosome()
    else:
        for g in GENES:
            if rng.random() < cfg.mutation_rate:
                genes[g] = sampler.gene(g)
    return Chromosome(**genes)


def _score(c: Chromosome, m, seed: int, where: str) -> float:
    try:
        return float(evaluate_fitness(c, m, seed))
    except (ValueError, KeyError) as exc:
        log.debug("%s: %s scored %s (%s)", where, c.describe(), FAILED_FITNESS, exc)
        return FAILED_FITNESS


def evolve(cfg: GAConfig, m) -> tuple[Chromosome, GAHistory]:
    """Run the generations loop and return the best chromosome seen.

    Each generation: score everyone, keep the top ``breed_fraction`` as
    parents, refill by uniform crossover plus mutation. The best chromosome so
    far is carried over unchanged (and not re-scored) so the max-fitness curve
    never drops.
    """
    n_rows = m.shape[0]
    if n_rows <= cfg.k_range[0]:
        raise ValueError(f"matrix has {n_rows} rows, need more than the smallest k {cfg.k_range[0]}")
    rng = rng_for(cfg.seed, "ga", "breed")
    sampler = _Sampler(cfg, m.col_ids, rng)
    population = init_population(cfg, m.col_ids)
    n_parents = max(1, math.ceil(cfg.breed_fraction * cfg.population))

    history = GAHistory()
    elite: Optional[tuple[Chromosome, float]] = None
    for gen in range(cfg.generations):
        fitness = []
        for idx, c in enumerate(population):
            if elite is not None and idx == 0:
                fitness.append(elite[1])
                continue
            seed = derive_seed(cfg.seed, "fitness", gen, idx)
            fitness.append(_score(c, m, seed, f"generation {gen}, chromosome {idx}"))
            history.evaluations += 1
        order = sorted(range(len(population)), key=lambda i: (-fitness[i], i))
        top = order[0]
        if elite is None or fitness[top] > elite[1]:
            elite = (population[top], fitness[top])
        history.max_fitness.append(float(max(fitness)))
        history.mean_fitness.append(float(np.mean(fitness)))
        log.info("generation %d: max %.4f mean %.4f", gen, history.max_fitness[-1],
                 history.mean_fitness[-1])
        if gen == cfg.generations - 1:
            break
        parents = [population[i] for i in order[:n_parents]]
        population = [elite[0]] + [_breed(parents, sampler) for _ in range(cfg.population - 1)]

    history.best, history.best_fitness = elite
    return elite[0], history


def with_fixed(cfg: GAConfig, k: Optional[int], mask) -> GAConfig:
    return replace(cfg, fixed_k=k, fixed_mask=None if mask is None else tuple(mask))
