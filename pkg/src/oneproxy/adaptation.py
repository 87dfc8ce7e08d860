"""Adapting a proxy latency predictor to a target device.

The adapted predictor rescales every operator weight of the proxy,
``w_adapted = (alpha + b) * w``, where ``alpha`` is a global scale and ``b``
is a sparse per-operator correction. Given target measurements ``(x_i, y_i)``
we minimize::

    (1/N) * sum_i ((alpha + b) * w . x_i - y_i)^2 + lam * ||b||_1

with proximal gradient descent: a gradient step on the smooth part over
``(alpha, b)``, then soft-thresholding of ``b`` by ``lam * step``. Step sizes
start optimistic and shrink by backtracking, never below ``1/L``. Iterates
are accelerated but only accepted when the objective does not increase, so
the reported sequence is monotone.
"""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DimensionMismatch, ParseError, TooFewSamples
from .latency_model import LatencyPredictor, MeasurementSet, linear_latency
from .monotonicity import srcc
from .search_space import SearchSpaceSpec

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class AdaptationParams:
    alpha: float
    b: np.ndarray
    lam: float = 0.0
    objective: float = float("nan")
    iterations: int = 0
    converged: bool = True
    validation_srcc: float | None = None
    trace: tuple[float, ...] = ()

    @property
    def nnz(self) -> int:
        return int(np.count_nonzero(self.b))

    def effective_weights(self, proxy_w: LatencyPredictor) -> np.ndarray:
        if self.b.shape != proxy_w.weights.shape:
            raise DimensionMismatch(f"b has shape {self.b.shape}, weights {proxy_w.weights.shape}")
        return (self.alpha + self.b) * proxy_w.weights

    def adapted_predictor(self, proxy_w: LatencyPredictor) -> LatencyPredictor:
        return LatencyPredictor(self.effective_weights(proxy_w), proxy_w.space_id)

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "b": self.b.tolist(),
            "lambda": self.lam,
            "validation_srcc": self.validation_srcc,
            "nnz": self.nnz,
            "objective": self.objective,
            "iterations": self.iterations,
            "converged": self.converged,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "AdaptationParams":
        try:
            return cls(
                alpha=float(doc["alpha"]),
                b=np.asarray(doc["b"], dtype=float),
                lam=float(doc.get("lambda", 0.0)),
                validation_srcc=doc.get("validation_srcc"),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"bad adaptation document: {exc}") from None

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1), encoding="utf-8")


def default_lambda_grid() -> tuple[float, ...]:
    return tuple(float(v) for v in np.logspace(-4, 1, 11))


@dataclass(frozen=True)
class AdaptationConfig:
    lambda_grid: tuple[float, ...] = field(default_factory=default_lambda_grid)
    backtrack_shrink: float = 0.5
    initial_step_scale: float = 4.0
    rel_tol: float = 1e-8
    max_iter: int = 50000
    train_count: int | None = None
    validation_count: int = 20
    keep_trace: bool = False
    workers: int = 1

    def __post_init__(self):
        if not self.lambda_grid or any(lam < 0 for lam in self.lambda_grid):
            raise ValueError("lambda_grid must be nonempty with lambda >= 0")
        if self.rel_tol <= 0:
            raise ValueError("rel_tol must be positive")
        if not 0 < self.backtrack_shrink < 1:
            raise ValueError("backtrack_shrink must be in (0, 1)")


def soft_threshold(z, t):
    return np.sign(z) * np.maximum(np.abs(z) - t, 0.0)


def objective(alpha, b, P, y, lam) -> float:
    """Objective on the reparametrized design ``P = X * w`` (one column per weight)."""
    r = P @ (alpha + b) - y
    return float(r @ r / y.shape[0] + lam * np.abs(b).sum())


def solve_design(P: np.ndarray, y: np.ndarray, lam: float, cfg: AdaptationConfig = AdaptationConfig(),
                 alpha0: float = 1.0, b0: np.ndarray | None = None) -> AdaptationParams:
    """Proximal gradient on a prebuilt design ``P[i, j] = w_j * x_ij``."""
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    N, M = P.shape
    if N == 0:
        raise TooFewSamples("no training samples")
    # theta = (alpha, b); smooth part is (1/N)||D theta - y||^2 with D = [P 1, P].
    # Iterate on phi = theta / c with Jacobi scaling c; the l1 term becomes
    # lam * c_j * |phi_j| and its prox a per-coordinate soft threshold.
    D = np.column_stack([P.sum(axis=1), P])
    diag = (D * D).sum(axis=0)
    c = np.where(diag > 0, 1.0 / np.sqrt(np.where(diag > 0, diag, 1.0)), 1.0)
    Dc = D * c[None, :]
    H = 2.0 / N * (Dc.T @ Dc)
    Dty = 2.0 / N * (Dc.T @ y)
    L = max(float(np.linalg.eigvalsh(H)[-1]), 1e-300)
    s_min = 1.0 / L
    pen = lam * c[1:]

    def smooth(phi):
        r = Dc @ phi - y
        return float(r @ r / N)

    def prox(v, s):
        out = v.copy()
        out[1:] = soft_threshold(v[1:], pen * s)
        return out

    def total(phi, f):
        return f + float(np.abs(pen * phi[1:]).sum())

    phi = np.empty(M + 1)
    phi[0] = alpha0
    phi[1:] = 0.0 if b0 is None else b0
    phi = phi / c
    f = smooth(phi)
    F = total(phi, f)
    trace = [F] if cfg.keep_trace else []
    # monotone FISTA: extrapolate from `point`, keep the iterate only when it
    # does not raise the objective; momentum restarts on rejection
    point, prev, t = phi.copy(), phi.copy(), 1.0
    s = cfg.initial_step_scale * s_min
    converged = False
    it = 0
    for it in range(1, cfg.max_iter + 1):
        f_p = smooth(point)
        grad = H @ point - Dty
        while True:
            cand = prox(point - s * grad, s)
            step = cand - point
            f_c = smooth(cand)
            if s <= s_min or f_c <= f_p + grad @ step + (step @ step) / (2 * s) + 1e-15 * abs(f_p):
                break
            s = max(s * cfg.backtrack_shrink, s_min)
        F_c = total(cand, f_c)
        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        if F_c <= F:
            prev, phi, f, F = phi, cand, f_c, F_c
            point = phi + ((t - 1.0) / t_next) * (phi - prev)
            t = t_next
        else:
            point, t = phi.copy(), 1.0
        if cfg.keep_trace:
            trace.append(F)
        if float(np.linalg.norm(step)) <= cfg.rel_tol * max(1.0, float(np.linalg.norm(phi))):
            converged = True
            break
    theta = phi * c
    if not converged:
        logger.warning("prox-gradient hit max_iter=%d at lambda=%g", cfg.max_iter, lam)
    return AdaptationParams(
        alpha=float(theta[0]),
        b=theta[1:].copy(),
        lam=lam,
        objective=F,
        iterations=it,
        converged=converged,
        trace=tuple(trace),
    )


def reparametrized_design(proxy_w: LatencyPredictor, mset: MeasurementSet, space: SearchSpaceSpec):
    proxy_w.check_space(space)
    X = space.encode_genes(mset.gene_matrix(space))
    return X * proxy_w.weights[None, :], mset.latencies


def solve_eq3(proxy_w: LatencyPredictor, train: MeasurementSet, lam: float,
              cfg: AdaptationConfig = AdaptationConfig(), space: SearchSpaceSpec | None = None
              ) -> AdaptationParams:
    """Fit ``(alpha, b)`` on ``train``; starts from alpha=1, b=0.

    ``converged=False`` on the result flags that ``max_iter`` was reached; the
    last iterate, which is also the best one, is returned.
    """
    if space is None:
        raise ValueError("space is required to encode the training genotypes")
    if len(train) == 0:
        raise TooFewSamples("train set is empty")
    P, y = reparametrized_design(proxy_w, train, space)
    return solve_design(P, y, lam, cfg)


def adapted_predict(params: AdaptationParams, proxy_w: LatencyPredictor, enc) -> float:
    x = np.asarray(enc, dtype=float)
    if x.shape != proxy_w.weights.shape or params.b.shape != proxy_w.weights.shape:
        raise DimensionMismatch("encoding, b and proxy weights must share one length")
    return float(linear_latency(x[None, :], (params.alpha + params.b) * proxy_w.weights)[0])


def split_samples(samples: MeasurementSet, cfg: AdaptationConfig, seed) -> tuple[MeasurementSet, MeasurementSet]:
    n_val = cfg.validation_count
    n_train = len(samples) - n_val if cfg.train_count is None else cfg.train_count
    if n_val < 2 or n_train < 1 or len(samples) < n_train + n_val:
        raise TooFewSamples(
            f"need {max(n_train, 1)} train + {n_val} validation samples, have {len(samples)}"
        )
    perm = np.random.default_rng(seed).permutation(len(samples))
    return samples.subset(perm[n_val : n_val + n_train]), samples.subset(perm[:n_val])


def tune_lambda(proxy_w: LatencyPredictor, samples: MeasurementSet,
                cfg: AdaptationConfig = AdaptationConfig(), space: SearchSpaceSpec | None = None,
                seed=0) -> tuple[float, AdaptationParams, float]:
    """Choose lambda by validation SRCC; ties go to the larger lambda."""
    if space is None:
        raise ValueError("space is required")
    train, val = split_samples(samples, cfg, seed)
    P, y = reparametrized_design(proxy_w, train, space)
    X_val = space.encode_genes(val.gene_matrix(space))
    y_val = val.latencies

    def run(lam):
        params = solve_design(P, y, lam, cfg)
        pred = linear_latency(X_val, params.effective_weights(proxy_w))
        try:
            score = srcc(pred, y_val)
        except ValueError:
            score = -1.0
        return params, score

    grid = list(cfg.lambda_grid)
    if cfg.workers > 1:
        with ThreadPoolExecutor(cfg.workers) as pool:
            results = list(pool.map(run, grid))
    else:
        results = [run(lam) for lam in grid]
    best = None
    for lam, (params, score) in zip(grid, results):
        if best is None or score > best[2] or (score == best[2] and lam > best[0]):
            best = (lam, params, score)
    lam, params, score = best
    params = AdaptationParams(
        alpha=params.alpha, b=params.b, lam=lam, objective=params.objective,
        iterations=params.iterations, converged=params.converged,
        validation_srcc=score, trace=params.trace,
    )
    return lam, params, score
