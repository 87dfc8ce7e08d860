"""Evolutionary architecture search and the exhaustive oracle.

Individuals are rows of a gene matrix. Each generation keeps the fittest
``ceil(population * parent_ratio)`` individuals as parents, breeds children
by gene-wise crossover of random parent pairs, and resamples a few children
outright. Fitness is ``(t - 1) * accuracy + t * latency`` and lower is better.

All randomness for generation ``g`` comes from a stream keyed by
``(seed, g)``; worker threads only evaluate fitness, so the result is the
same for any worker count.
"""

from __future__ import annotations

import hashlib
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .accuracy_model import AccuracyPredictor
from .errors import InfeasibleConstraint, SpaceMismatch
from .pareto import LatencySource, ParetoSet, ScoredArch, pareto_front
from .search_space import Genotype, SearchSpaceSpec, enumerate_genes

LatencyFn = Callable[[Genotype], float]
INIT_DRAW_CAP = 10  # times the population


@dataclass(frozen=True)
class Scalarized:
    t: float

    def __post_init__(self):
        if not 0.0 <= self.t <= 1.0:
            raise ValueError(f"t must be in [0, 1], got {self.t}")


@dataclass(frozen=True)
class Constrained:
    max_latency_ms: float

    def __post_init__(self):
        if not self.max_latency_ms > 0:
            raise ValueError("latency constraint must be positive")


@dataclass(frozen=True)
class EvoConfig:
    population: int = 1000
    parent_ratio: float = 0.25
    mutation_prob: float = 0.1
    mutation_ratio: float = 0.25
    generations: int = 50
    mode: Scalarized | Constrained = field(default_factory=lambda: Scalarized(0.5))
    normalize_latency: bool = False
    seed: int | tuple[int, ...] = 0
    workers: int = 1

    def __post_init__(self):
        if self.population < 2:
            raise ValueError("population must be >= 2")
        if not 0 < self.parent_ratio < 1:
            raise ValueError("parent_ratio must be in (0, 1)")
        if not (0 <= self.mutation_prob <= 1 and 0 <= self.mutation_ratio <= 1):
            raise ValueError("mutation_prob and mutation_ratio must be in [0, 1]")
        if self.generations < 0:
            raise ValueError("generations must be >= 0")

    @property
    def parent_count(self) -> int:
        return min(self.population - 1, math.ceil(self.population * self.parent_ratio))

    def to_dict(self) -> dict:
        if isinstance(self.mode, Scalarized):
            mode = {"kind": "Scalarized", "t": self.mode.t}
        else:
            mode = {"kind": "Constrained", "max_latency_ms": self.mode.max_latency_ms}
        return {
            "population": self.population,
            "parent_ratio": self.parent_ratio,
            "mutation_prob": self.mutation_prob,
            "mutation_ratio": self.mutation_ratio,
            "generations": self.generations,
            "mode": mode,
            "normalize_latency": self.normalize_latency,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "EvoConfig":
        doc = dict(doc)
        mode = doc.pop("mode", None)
        if mode is not None:
            if mode.get("kind") == "Constrained":
                doc["mode"] = Constrained(float(mode["max_latency_ms"]))
            else:
                doc["mode"] = Scalarized(float(mode.get("t", 0.5)))
        return cls(**doc)


@dataclass(frozen=True)
class Individual:
    genotype: Genotype
    predicted_accuracy: float
    predicted_latency_ms: float
    fitness: float

    def scored(self) -> ScoredArch:
        return ScoredArch(self.genotype, self.predicted_accuracy, self.predicted_latency_ms,
                          LatencySource.PREDICTED)


@dataclass(frozen=True)
class EvoResult:
    population: tuple[Individual, ...]  # ranked, best first
    best: Individual
    log: tuple[dict, ...]
    best_fitness_history: tuple[float, ...]

    def log_json(self) -> str:
        return "\n".join(json.dumps(entry) for entry in self.log)


def fitness(accuracy, latency_ms, t: float, normalize_scale: float | None = None):
    """Scalarized objective; works on scalars or arrays."""
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"t must be in [0, 1], got {t}")
    lat = latency_ms if normalize_scale is None else np.divide(latency_ms, normalize_scale)
    return (t - 1.0) * accuracy + t * lat


def _seed_list(seed) -> list[int]:
    return list(seed) if isinstance(seed, (tuple, list)) else [int(seed)]


def crossover(p1: Genotype, p2: Genotype, space: SearchSpaceSpec, seed) -> Genotype:
    """Each gene comes from either parent with probability 1/2."""
    try:
        a, b = space.genes(p1), space.genes(p2)
    except Exception as exc:
        raise SpaceMismatch(f"parents do not belong to {space.space_id}: {exc}") from None
    rng = np.random.default_rng(_seed_list(seed))
    take_first = rng.random(a.shape[0]) < 0.5
    return space.from_genes(np.where(take_first, a, b))


def mutate(g: Genotype, space: SearchSpaceSpec, seed) -> Genotype:
    """Resample every gene uniformly."""
    space.validate(g)
    rng = np.random.default_rng(_seed_list(seed))
    return space.from_genes(space.sample_genes(rng, 1)[0])


def _latency_batch(fn: LatencyFn, space: SearchSpaceSpec, G: np.ndarray) -> np.ndarray:
    batch = getattr(fn, "batch", None)
    if batch is not None:
        return np.asarray(batch(G), dtype=float)
    return np.array([fn(space.from_genes(row)) for row in G], dtype=float)


class _Evaluator:
    """Memoized (accuracy, latency) lookup keyed by canonical genes."""

    def __init__(self, space, acc_pred, lat_fn, workers=1, chunk=256):
        self.space = space
        self.acc_pred = acc_pred
        self.lat_fn = lat_fn
        self.workers = max(1, int(workers))
        self.chunk = chunk
        self.cache: dict[bytes, tuple[float, float]] = {}

    def _compute(self, C):
        return self.acc_pred.batch(self.space, C), _latency_batch(self.lat_fn, self.space, C)

    def __call__(self, G: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        C = self.space.canonical_genes(G)
        keys = [row.tobytes() for row in C]
        missing = {}
        for k, row in zip(keys, C):
            if k not in self.cache and k not in missing:
                missing[k] = row
        if missing:
            M = np.array(list(missing.values()))
            parts = [M[i : i + self.chunk] for i in range(0, M.shape[0], self.chunk)]
            if self.workers > 1 and len(parts) > 1:
                with ThreadPoolExecutor(self.workers) as pool:
                    results = list(pool.map(self._compute, parts))
            else:
                results = [self._compute(p) for p in parts]
            acc = np.concatenate([r[0] for r in results])
            lat = np.concatenate([r[1] for r in results])
            for k, a, l in zip(missing, acc, lat):
                self.cache[k] = (float(a), float(l))
        vals = np.array([self.cache[k] for k in keys])
        return vals[:, 0], vals[:, 1]


def _population_hash(space: SearchSpaceSpec, G: np.ndarray) -> str:
    C = np.ascontiguousarray(space.canonical_genes(G), dtype=np.int64)
    return hashlib.blake2b(C.tobytes(), digest_size=16).hexdigest()


def _rank(fit, lat, acc) -> np.ndarray:
    # ties broken toward lower latency, then higher accuracy, then position
    return np.lexsort((np.arange(fit.shape[0]), -acc, lat, fit))


def _initial_population(space, cfg, evaluate, rng):
    """Random population; Constrained mode redraws until one member is feasible."""
    G = space.sample_genes(rng, cfg.population)
    if not isinstance(cfg.mode, Constrained):
        return G
    bound = cfg.mode.max_latency_ms
    drawn = cfg.population
    while not np.any(evaluate(G)[1] <= bound):
        if drawn >= INIT_DRAW_CAP * cfg.population:
            raise InfeasibleConstraint(f"no genotype under {bound} ms in {drawn} random draws")
        G = space.sample_genes(rng, cfg.population)
        drawn += cfg.population
    return G


def run_evolution(space: SearchSpaceSpec, acc_pred: AccuracyPredictor, lat_predict_fn: LatencyFn,
                  cfg: EvoConfig = EvoConfig(), evaluator: _Evaluator | None = None) -> EvoResult:
    evaluate = evaluator or _Evaluator(space, acc_pred, lat_predict_fn, cfg.workers)
    seed = _seed_list(cfg.seed)
    n_pop = cfg.population
    n_par = cfg.parent_count
    n_child = n_pop - n_par
    n_mut = min(n_child, math.ceil(cfg.mutation_ratio * n_pop))

    G = _initial_population(space, cfg, evaluate, np.random.default_rng([*seed, 0]))
    acc, lat = evaluate(G)
    scale = float(lat.max()) if cfg.normalize_latency else None

    def score(acc, lat):
        if isinstance(cfg.mode, Scalarized):
            return fitness(acc, lat, cfg.mode.t, scale)
        return np.where(lat <= cfg.mode.max_latency_ms, -acc, np.inf)

    log = []
    history = []
    for gen in range(cfg.generations + 1):
        fit = score(acc, lat)
        order = _rank(fit, lat, acc)
        G, acc, lat, fit = G[order], acc[order], lat[order], fit[order]
        history.append(float(fit[0]))
        log.append({
            "generation": gen,
            "best_fitness": None if not np.isfinite(fit[0]) else float(fit[0]),
            "best_genotype": space.to_json(space.from_genes(G[0])),
            "population_hash": _population_hash(space, G),
        })
        if gen == cfg.generations:
            break
        rng = np.random.default_rng([*seed, gen + 1])
        parents = G[:n_par]
        i = rng.integers(n_par, size=n_child)
        if n_par >= 2:
            j = rng.integers(n_par - 1, size=n_child)
            j = j + (j >= i)
        else:
            j = i
        take_first = rng.random((n_child, space.n_genes)) < 0.5
        children = np.where(take_first, parents[i], parents[j])
        if n_mut:
            cand = rng.choice(n_child, size=n_mut, replace=False)
            hit = cand[rng.random(n_mut) < cfg.mutation_prob]
            if hit.shape[0]:
                children[hit] = space.sample_genes(rng, hit.shape[0])
        G = np.concatenate([parents, children])
        c_acc, c_lat = evaluate(children)
        acc = np.concatenate([acc[:n_par], c_acc])
        lat = np.concatenate([lat[:n_par], c_lat])

    pop = tuple(
        Individual(space.from_genes(g), float(a), float(l), float(f))
        for g, a, l, f in zip(G, acc, lat, fit)
    )
    return EvoResult(pop, pop[0], tuple(log), tuple(history))


def sweep_tradeoff(space: SearchSpaceSpec, acc_pred: AccuracyPredictor, lat_predict_fn: LatencyFn,
                   cfg: EvoConfig = EvoConfig(), t_grid: Sequence[float] | None = None,
                   latency_grid: Sequence[float] | None = None) -> ParetoSet:
    """Best individual of one run per grid point, reduced to its Pareto front.

    Grid point ``k`` runs with seed ``(cfg.seed, k)``. With neither grid given,
    ``t`` sweeps 11 evenly spaced values in [0, 1].
    """
    if t_grid is not None and latency_grid is not None:
        raise ValueError("give either t_grid or latency_grid")
    if latency_grid is not None:
        modes = [Constrained(float(v)) for v in latency_grid]
    else:
        grid = np.linspace(0.0, 1.0, 11) if t_grid is None else t_grid
        modes = [Scalarized(float(t)) for t in grid]
    if not modes:
        raise ValueError("grid is empty")
    evaluator = _Evaluator(space, acc_pred, lat_predict_fn, cfg.workers)
    best: dict[tuple, ScoredArch] = {}
    for k, mode in enumerate(modes):
        run_cfg = replace(cfg, mode=mode, seed=(*_seed_list(cfg.seed), k))
        ind = run_evolution(space, acc_pred, lat_predict_fn, run_cfg, evaluator).best
        best.setdefault(space.key(ind.genotype), ind.scored())
    return pareto_front(list(best.values()))


def evaluate_all(space: SearchSpaceSpec, acc_pred: AccuracyPredictor, lat_predict_fn: LatencyFn):
    """Every genotype of an enumerable space with its accuracy and latency."""
    G = enumerate_genes(space)
    return G, acc_pred.batch(space, G), _latency_batch(lat_predict_fn, space, G)


def exhaustive_search(space: SearchSpaceSpec, acc_pred: AccuracyPredictor,
                      lat_predict_fn: LatencyFn) -> ParetoSet:
    G, acc, lat = evaluate_all(space, acc_pred, lat_predict_fn)
    pts = [ScoredArch(space.from_genes(g), float(a), float(l)) for g, a, l in zip(G, acc, lat)]
    return pareto_front(pts)
