"""Dominance, Pareto fronts and post-measurement pruning.

Objectives are accuracy (maximize) and latency (minimize).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

from .errors import EmptyInput, PredictedLatencyRejected
from .search_space import Genotype, SearchSpaceSpec

DEFAULT_EPSILON_ACC = 0.001
# absorbs rounding in acc2 >= acc1 - eps
_ACC_SLACK = 1e-12


class LatencySource(str, Enum):
    PREDICTED = "Predicted"
    MEASURED = "Measured"


@dataclass(frozen=True)
class ScoredArch:
    genotype: Genotype
    accuracy: float
    latency_ms: float
    latency_source: LatencySource = LatencySource.PREDICTED

    def __post_init__(self):
        if not self.latency_ms > 0:
            raise ValueError(f"latency must be positive, got {self.latency_ms}")
        if not 0.0 <= self.accuracy <= 1.0:
            raise ValueError(f"accuracy must be in [0, 1], got {self.accuracy}")


@dataclass(frozen=True)
class ParetoSet:
    members: tuple[ScoredArch, ...]

    def __len__(self):
        return len(self.members)

    def __iter__(self):
        return iter(self.members)

    @property
    def genotypes(self) -> list[Genotype]:
        return [m.genotype for m in self.members]


def dominates(a: ScoredArch, b: ScoredArch) -> bool:
    return (
        a.latency_ms <= b.latency_ms
        and a.accuracy >= b.accuracy
        and (a.latency_ms < b.latency_ms or a.accuracy > b.accuracy)
    )


def front_mask(accuracy, latency) -> np.ndarray:
    """Boolean mask of non-dominated points; exact ties are all kept."""
    acc = np.asarray(accuracy, dtype=float)
    lat = np.asarray(latency, dtype=float)
    order = np.lexsort((-acc, lat))
    keep = np.zeros(acc.shape[0], dtype=bool)
    best_before = -np.inf  # best accuracy among strictly faster points
    i = 0
    n = order.shape[0]
    while i < n:
        j = i
        while j < n and lat[order[j]] == lat[order[i]]:
            j += 1
        group = order[i:j]
        top = acc[group[0]]
        if top > best_before:
            keep[group[acc[group] == top]] = True
            best_before = top
        i = j
    return keep


def pareto_front(points: Sequence[ScoredArch]) -> ParetoSet:
    if not points:
        raise EmptyInput("pareto_front needs at least one point")
    mask = front_mask([p.accuracy for p in points], [p.latency_ms for p in points])
    members = [p for p, k in zip(points, mask) if k]
    members.sort(key=lambda p: (p.latency_ms, -p.accuracy))
    return ParetoSet(tuple(members))


def remove_non_pareto(candidates: Sequence[ScoredArch], epsilon_acc: float = DEFAULT_EPSILON_ACC) -> ParetoSet:
    """Drop architectures beaten by a faster one of the same or similar accuracy.

    ``x1`` is removed when some ``x2`` is strictly faster with accuracy at least
    ``acc(x1) - epsilon_acc``; survivors then go through :func:`pareto_front`.
    """
    if not candidates:
        raise EmptyInput("no candidates")
    if any(c.latency_source is not LatencySource.MEASURED for c in candidates):
        raise PredictedLatencyRejected("remove_non_pareto needs measured latencies")
    acc = np.array([c.accuracy for c in candidates])
    lat = np.array([c.latency_ms for c in candidates])
    order = np.argsort(lat, kind="mergesort")
    removed = np.zeros(len(candidates), dtype=bool)
    best = -np.inf
    i = 0
    while i < len(order):
        j = i
        while j < len(order) and lat[order[j]] == lat[order[i]]:
            j += 1
        group = order[i:j]
        removed[group] = best >= acc[group] - epsilon_acc - _ACC_SLACK
        best = max(best, float(acc[group].max()))
        i = j
    survivors = [c for c, r in zip(candidates, removed) if not r]
    return pareto_front(survivors)


def hypervolume(points: Iterable[ScoredArch] | np.ndarray, ref_latency: float, ref_accuracy: float = 0.0) -> float:
    """Area dominated by ``points`` inside the box bounded by the reference point.

    Accepts ScoredArch objects or an ``(n, 2)`` array of (accuracy, latency).
    """
    if isinstance(points, np.ndarray):
        arr = points.reshape(-1, 2)
    else:
        arr = np.array([(p.accuracy, p.latency_ms) for p in points], dtype=float).reshape(-1, 2)
    arr = arr[(arr[:, 1] < ref_latency) & (arr[:, 0] > ref_accuracy)]
    if arr.shape[0] == 0:
        return 0.0
    arr = arr[np.argsort(arr[:, 1], kind="mergesort")]
    best = np.maximum.accumulate(arr[:, 0]) - ref_accuracy
    edges = np.r_[arr[:, 1], ref_latency]
    return float(np.sum(best * np.diff(edges)))


FRONT_HEADER = ["genotype_json", "accuracy", "latency_ms", "latency_source"]


def write_front_csv(path, front: Iterable[ScoredArch], space: SearchSpaceSpec) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(FRONT_HEADER)
        for m in front:
            w.writerow([space.dumps(m.genotype), repr(m.accuracy), repr(m.latency_ms), m.latency_source.value])


def write_front_svg(path, points: Sequence[ScoredArch], front: Sequence[ScoredArch], title: str = "") -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(5, 4))
    if points:
        ax.scatter([p.latency_ms for p in points], [p.accuracy for p in points], s=8, c="0.7",
                   label="candidates")
    fr = sorted(front, key=lambda p: p.latency_ms)
    ax.plot([p.latency_ms for p in fr], [p.accuracy for p in fr], "o-", c="tab:red", ms=4,
            label="front")
    ax.set_xlabel("latency (ms)")
    ax.set_ylabel("accuracy")
    if title:
        ax.set_title(title)
    ax.legend(loc="lower right")
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
