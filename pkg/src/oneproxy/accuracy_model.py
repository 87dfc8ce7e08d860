"""Device-independent accuracy oracles.

``Synthetic`` is a saturating function of FLOPs plus a small deterministic
jitter, so larger models are more accurate but not strictly ordered by FLOPs.
``Tabular`` looks accuracies up in a CSV (``genotype_json,accuracy``).
"""

from __future__ import annotations

import csv
import hashlib
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import InvalidGenotype, OutOfRangeAccuracy, ParseError, UnknownArchitecture
from .search_space import Genotype, SearchSpaceSpec


class AccuracyMode(str, Enum):
    SYNTHETIC = "Synthetic"
    TABULAR = "Tabular"


@dataclass(frozen=True, eq=False)
class AccuracyPredictor:
    mode: AccuracyMode
    a_max: float = 0.80
    f0: float = 1.0
    jitter_sigma: float = 0.005
    seed: int = 0
    table: dict = field(default_factory=dict)
    space_id: str = ""

    def jitter(self, key: tuple[int, ...]) -> float:
        if self.jitter_sigma == 0:
            return 0.0
        h = hashlib.blake2b(digest_size=8)
        h.update(str(self.seed).encode())
        h.update(b"|")
        h.update(",".join(map(str, key)).encode())
        u = int.from_bytes(h.digest(), "big") / 2.0**64
        return (2.0 * u - 1.0) * self.jitter_sigma

    def batch(self, space: SearchSpaceSpec, G) -> np.ndarray:
        """Accuracies for a gene matrix; rows need not be canonical."""
        C = space.canonical_genes(G)
        if self.mode is AccuracyMode.TABULAR:
            out = np.empty(C.shape[0])
            for i, row in enumerate(C):
                key = tuple(int(v) for v in row)
                try:
                    out[i] = self.table[key]
                except KeyError:
                    raise UnknownArchitecture(space.dumps(space.from_genes(row))) from None
            return out
        flops, _ = space.stats_genes(C)
        base = self.a_max * (1.0 - np.exp(-flops / self.f0))
        jit = np.array([self.jitter(tuple(int(v) for v in row)) for row in C])
        return np.clip(base + jit, 0.0, 1.0)


def synthetic(space: SearchSpaceSpec, a_max: float = 0.80, f0: float | None = None,
              jitter_sigma: float = 0.005, seed: int = 0) -> AccuracyPredictor:
    """Synthetic surrogate; ``f0`` defaults to the median FLOPs of 1000 random samples."""
    if f0 is None:
        rng = np.random.default_rng([seed, 1000])
        flops, _ = space.stats_genes(space.sample_genes(rng, 1000))
        f0 = float(np.median(flops))
    if not f0 > 0:
        raise ValueError("f0 must be positive")
    return AccuracyPredictor(AccuracyMode.SYNTHETIC, a_max=a_max, f0=f0,
                             jitter_sigma=jitter_sigma, seed=seed, space_id=space.space_id)


def predict_accuracy(pred: AccuracyPredictor, genotype: Genotype, space: SearchSpaceSpec) -> float:
    return float(pred.batch(space, space.genes(genotype))[0])


def load_table(path, space: SearchSpaceSpec) -> AccuracyPredictor:
    table = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["genotype_json", "accuracy"]:
            raise ParseError("expected header genotype_json,accuracy", row=1)
        for lineno, rec in enumerate(reader, start=2):
            if not rec or all(not c.strip() for c in rec):
                continue
            if len(rec) != 2:
                raise ParseError(f"expected 2 columns, got {len(rec)}", row=lineno)
            try:
                g = space.from_json(rec[0])
            except (InvalidGenotype, ParseError) as exc:
                raise ParseError(str(exc), row=lineno) from None
            try:
                acc = float(rec[1])
            except ValueError:
                raise ParseError(f"accuracy {rec[1]!r} is not a number", row=lineno) from None
            if not 0.0 <= acc <= 1.0:
                raise OutOfRangeAccuracy(f"row {lineno}: accuracy {acc} outside [0, 1]")
            key = space.key(g)
            if key in table:
                raise ParseError("duplicate genotype", row=lineno)
            table[key] = acc
    return AccuracyPredictor(AccuracyMode.TABULAR, table=table, space_id=space.space_id)


def write_table(path, space: SearchSpaceSpec, genotypes, accuracies) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["genotype_json", "accuracy"])
        for g, a in zip(genotypes, accuracies):
            w.writerow([space.dumps(g), repr(float(a))])
