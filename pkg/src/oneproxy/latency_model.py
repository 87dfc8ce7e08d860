"""Operator-level linear latency predictors.

A predictor is a weight vector over the one-hot encoding plus bias, so the
predicted latency of an architecture is the sum of its active operators'
latencies plus the non-searchable part.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
import scipy.linalg

from .errors import (
    DegenerateDesign,
    DimensionMismatch,
    DuplicateGenotype,
    InvalidGenotype,
    NonpositiveLatency,
    ParseError,
    SpaceMismatch,
    TooFewSamples,
)
from .search_space import Genotype, SearchSpaceSpec

DEFAULT_RIDGE = 1e-8
_MAX_CONDITION = 1e15


@dataclass(frozen=True, eq=False)
class LatencyPredictor:
    weights: np.ndarray
    space_id: str

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        if w.ndim != 1 or not np.all(np.isfinite(w)):
            raise ValueError("weights must be a finite 1-D vector")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    def check_space(self, space: SearchSpaceSpec) -> None:
        if space.space_id != self.space_id:
            raise SpaceMismatch(f"predictor is for {self.space_id}, space is {space.space_id}")
        if space.encoding_length != self.weights.shape[0]:
            raise DimensionMismatch(
                f"predictor has {self.weights.shape[0]} weights, space encodes {space.encoding_length}"
            )

    def predict_genes(self, space: SearchSpaceSpec, G) -> np.ndarray:
        self.check_space(space)
        return linear_latency(space.encode_genes(G), self.weights)

    def as_fn(self, space: SearchSpaceSpec) -> Callable[[Genotype], float]:
        """Genotype -> latency callable for search routines."""
        self.check_space(space)

        def fn(g: Genotype) -> float:
            return float(self.predict_genes(space, space.genes(g))[0])

        fn.batch = lambda G: self.predict_genes(space, G)  # type: ignore[attr-defined]
        return fn

    def to_dict(self) -> dict:
        return {"space_id": self.space_id, "weights": self.weights.tolist()}

    @classmethod
    def from_dict(cls, doc: dict) -> "LatencyPredictor":
        try:
            return cls(weights=np.asarray(doc["weights"], dtype=float), space_id=doc["space_id"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"bad predictor document: {exc}") from None

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1), encoding="utf-8")

    @classmethod
    def load(cls, path) -> "LatencyPredictor":
        try:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}: {exc}") from None
        return cls.from_dict(doc)


@dataclass(frozen=True)
class MeasurementSample:
    genotype: Genotype
    latency_ms: float

    def __post_init__(self):
        if not self.latency_ms > 0:
            raise NonpositiveLatency(f"latency must be positive, got {self.latency_ms}")


@dataclass(frozen=True)
class MeasurementSet:
    device_id: str
    samples: tuple[MeasurementSample, ...] = field(default_factory=tuple)

    def __len__(self):
        return len(self.samples)

    @property
    def latencies(self) -> np.ndarray:
        return np.array([s.latency_ms for s in self.samples], dtype=float)

    def gene_matrix(self, space: SearchSpaceSpec) -> np.ndarray:
        if not self.samples:
            return np.zeros((0, space.n_genes), dtype=np.int64)
        return np.stack([space.genes(s.genotype) for s in self.samples])

    def subset(self, idx: Sequence[int]) -> "MeasurementSet":
        return MeasurementSet(self.device_id, tuple(self.samples[i] for i in idx))

    def extend(self, more: Sequence[MeasurementSample]) -> "MeasurementSet":
        return MeasurementSet(self.device_id, self.samples + tuple(more))


def linear_latency(X, w) -> np.ndarray:
    """Row-wise ``X @ w`` summed in sorted term order.

    Architectures using the same multiset of operators then get bit-identical
    latencies, so exact ties survive rescaling of the weights.
    """
    terms = np.sort(np.asarray(X, dtype=float) * np.asarray(w, dtype=float)[None, :], axis=1)
    return terms.sum(axis=1)


def predict(pred: LatencyPredictor, enc) -> float:
    x = np.asarray(enc, dtype=float)
    if x.shape != pred.weights.shape:
        raise DimensionMismatch(f"encoding shape {x.shape} != weights shape {pred.weights.shape}")
    return float(linear_latency(x[None, :], pred.weights)[0])


def fit_design(X: np.ndarray, y: np.ndarray, ridge: float = DEFAULT_RIDGE) -> np.ndarray:
    """Ridge least squares via Cholesky on the regularized normal equations."""
    if ridge <= 0:
        raise ValueError("ridge must be positive")
    A = X.T @ X
    A[np.diag_indices_from(A)] += ridge
    rhs = X.T @ y
    eig = np.linalg.eigvalsh(A)
    if not np.all(np.isfinite(eig)) or eig[0] <= 0 or eig[-1] / eig[0] > _MAX_CONDITION:
        raise DegenerateDesign(f"normal system condition {eig[-1] / max(eig[0], 1e-300):.3g}")
    try:
        factor = scipy.linalg.cho_factor(A)
    except np.linalg.LinAlgError as exc:
        raise DegenerateDesign(str(exc)) from None
    w = scipy.linalg.cho_solve(factor, rhs)
    # one step of iterative refinement recovers digits lost to conditioning
    w += scipy.linalg.cho_solve(factor, rhs - A @ w)
    return w


def fit(samples: MeasurementSet, space: SearchSpaceSpec, ridge: float = DEFAULT_RIDGE) -> LatencyPredictor:
    """Fit operator weights minimizing squared error plus ``ridge * ||w||^2``.

    Underdetermined designs (fewer samples than features) are allowed; the
    ridge term picks the small-norm solution.
    """
    if len(samples) < 2:
        raise TooFewSamples("fit needs at least 2 samples")
    X = space.encode_genes(samples.gene_matrix(space))
    w = fit_design(X, samples.latencies, ridge)
    return LatencyPredictor(weights=w, space_id=space.space_id)


def evaluate(pred: LatencyPredictor, holdout: MeasurementSet, space: SearchSpaceSpec) -> dict:
    from .monotonicity import srcc

    if len(holdout) < 3:
        raise TooFewSamples("evaluate needs at least 3 holdout samples")
    predicted = pred.predict_genes(space, holdout.gene_matrix(space))
    actual = holdout.latencies
    rmse = float(np.sqrt(np.mean((predicted - actual) ** 2)))
    return {"rmse_ms": rmse, "srcc_vs_actual": srcc(predicted, actual)}


# ---------------------------------------------------------------------------
# CSV: device_id,genotype_json,latency_ms

MEASUREMENT_HEADER = ["device_id", "genotype_json", "latency_ms"]


def read_measurements(path, space: SearchSpaceSpec, device_id: str | None = None) -> MeasurementSet:
    """Parse and validate a measurement CSV.

    Rows must share one ``device_id`` unless ``device_id`` selects one of
    several. Duplicate genotypes (after canonicalization) are rejected.
    """
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != MEASUREMENT_HEADER:
            raise ParseError(f"expected header {','.join(MEASUREMENT_HEADER)}", row=1)
        for lineno, rec in enumerate(reader, start=2):
            if not rec or all(not c.strip() for c in rec):
                continue
            if len(rec) != 3:
                raise ParseError(f"expected 3 columns, got {len(rec)}", row=lineno)
            rows.append((lineno, rec))
    devices = sorted({rec[0] for _, rec in rows})
    if device_id is None:
        if len(devices) > 1:
            raise ParseError(f"multiple device ids {devices}; pick one")
        device_id = devices[0] if devices else ""
    samples = []
    seen = {}
    for lineno, (dev, gjson, lat) in rows:
        if dev != device_id:
            continue
        try:
            g = space.from_json(gjson)
        except InvalidGenotype as exc:
            raise ParseError(str(exc), row=lineno) from None
        except ParseError as exc:
            raise ParseError(str(exc), row=lineno) from None
        try:
            value = float(lat)
        except ValueError:
            raise ParseError(f"latency {lat!r} is not a number", row=lineno) from None
        if not np.isfinite(value):
            raise ParseError(f"latency {lat!r} is not finite", row=lineno)
        if value <= 0:
            raise NonpositiveLatency(f"latency {lat} is not positive", row=lineno)
        key = space.key(g)
        if key in seen:
            raise DuplicateGenotype(f"genotype already listed at row {seen[key]}", row=lineno)
        seen[key] = lineno
        samples.append(MeasurementSample(g, value))
    return MeasurementSet(device_id, tuple(samples))


def write_measurements(path, mset: MeasurementSet, space: SearchSpaceSpec) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(MEASUREMENT_HEADER)
        for s in mset.samples:
            w.writerow([mset.device_id, space.dumps(s.genotype), repr(float(s.latency_ms))])
