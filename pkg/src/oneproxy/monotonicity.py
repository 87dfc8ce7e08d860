"""Spearman rank correlation, sampled SRCC estimation and proxy selection."""

from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.stats import rankdata

from .errors import DegenerateInput, LengthMismatch

RETRY_CAP = 100


@dataclass(frozen=True)
class SrccEstimate:
    mean: float
    std_dev: float
    sample_size: int
    runs: int


@dataclass(frozen=True, eq=False)
class SrccMatrix:
    device_ids: tuple[str, ...]
    values: np.ndarray

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["device_id", *self.device_ids])
            for dev, row in zip(self.device_ids, self.values):
                w.writerow([dev, *(repr(float(v)) for v in row)])


def average_ranks(a) -> np.ndarray:
    """1-based ranks; tied values share the mean of the ranks they span."""
    return rankdata(np.asarray(a, dtype=float), method="average")


def srcc(a, b) -> float:
    """Pearson correlation of average-ranked data."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise LengthMismatch(f"lists have shapes {a.shape} and {b.shape}")
    if a.shape[0] < 2:
        raise LengthMismatch("need at least 2 values")
    if np.all(a == a[0]) or np.all(b == b[0]):
        raise DegenerateInput("constant latency list")
    ra = average_ranks(a)
    rb = average_ranks(b)
    da = ra - ra.mean()
    db = rb - rb.mean()
    r = float(np.dot(da, db) / np.sqrt(np.dot(da, da) * np.dot(db, db)))
    return min(1.0, max(-1.0, r))


def _one_run(a, b, sample_size, seed, run):
    rng = np.random.default_rng([seed, run])
    n = a.shape[0]
    for _ in range(RETRY_CAP):
        idx = rng.choice(n, size=sample_size, replace=False)
        try:
            return srcc(a[idx], b[idx])
        except DegenerateInput:
            continue
    raise DegenerateInput(f"run {run}: {RETRY_CAP} degenerate draws in a row")


def estimate_srcc(a, b, sample_size: int, runs: int, seed=0, workers: int = 1) -> SrccEstimate:
    """Mean and population std of SRCC over random subsets without replacement.

    Run ``r`` draws from its own stream keyed by ``(seed, r)``, so the result
    does not depend on ``workers``.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise LengthMismatch(f"lists have shapes {a.shape} and {b.shape}")
    if not 2 <= sample_size <= a.shape[0]:
        raise ValueError(f"sample_size must be in [2, {a.shape[0]}]")
    if runs < 1:
        raise ValueError("runs must be >= 1")
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            vals = list(pool.map(lambda r: _one_run(a, b, sample_size, seed, r), range(runs)))
    else:
        vals = [_one_run(a, b, sample_size, seed, r) for r in range(runs)]
    vals = np.array(vals)
    return SrccEstimate(float(vals.mean()), float(vals.std()), sample_size, runs)


def srcc_matrix(latency_table, device_ids: Sequence[str] | None = None) -> SrccMatrix:
    """Pairwise SRCC of a devices x architectures latency table."""
    T = np.asarray(latency_table, dtype=float)
    if T.ndim != 2 or T.shape[0] < 2 or T.shape[1] < 2:
        raise LengthMismatch("need at least 2 devices and 2 architectures")
    n = T.shape[0]
    ids = tuple(device_ids) if device_ids is not None else tuple(f"d{i}" for i in range(n))
    if len(ids) != n:
        raise LengthMismatch("device_ids length does not match table rows")
    M = np.eye(n)
    for i in range(n):
        for j in range(i + 1, n):
            M[i, j] = M[j, i] = srcc(T[i], T[j])
    return SrccMatrix(ids, M)


def select_proxy(matrix: SrccMatrix, threshold: float) -> str:
    """Device with the most partners at or above ``threshold``.

    Ties go to the highest mean off-diagonal SRCC, then the smallest id.
    """
    M = matrix.values
    n = M.shape[0]
    off = ~np.eye(n, dtype=bool)
    best = None
    for i, dev in enumerate(matrix.device_ids):
        partners = M[i][off[i]]
        key = (-int(np.sum(partners >= threshold)), -float(partners.mean()), dev)
        if best is None or key < best:
            best = key
    return best[2]
