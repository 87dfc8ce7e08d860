"""End-to-end transfer of a proxy device's search results to a new target.

1. Measure a few random architectures on the target and compare their
   ranking with the proxy predictor's.
2. If the rank correlation clears the threshold, reuse the proxy: either its
   stored Pareto set or a fresh search on its predictor.
3. Otherwise adapt the proxy predictor to the target, re-checking the rank
   correlation on fresh measurements and adding measurements until it clears
   the threshold or the budget runs out.
4. Search on the operative predictor, measure the candidates on the target
   and drop those beaten by a faster, similarly accurate candidate.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Callable

import numpy as np

from .accuracy_model import AccuracyPredictor, load_table, synthetic
from .adaptation import AdaptationConfig, AdaptationParams, default_lambda_grid, tune_lambda
from .device_sim import (
    RooflineDevice,
    SyntheticDeviceFamilySpec,
    generate_family,
    roofline_predictor,
    simulate_genes,
)
from .errors import BudgetExhausted, DegenerateInput, ParseError, UnknownArchitecture
from .evo_search import EvoConfig, sweep_tradeoff
from .latency_model import LatencyPredictor, MeasurementSample, MeasurementSet, read_measurements
from .monotonicity import srcc
from .pareto import (
    DEFAULT_EPSILON_ACC,
    LatencySource,
    ParetoSet,
    ScoredArch,
    remove_non_pareto,
    write_front_csv,
    write_front_svg,
)
from .search_space import BUILTIN_SPACES, Genotype, SearchSpaceSpec, load_space

logger = logging.getLogger(__name__)


class ReuseMode(str, Enum):
    REUSE_SET = "ReuseSet"
    RESEARCH_ON_PROXY = "ResearchOnProxy"


@dataclass(frozen=True)
class ProxyState:
    proxy_device_id: str
    proxy_predictor: LatencyPredictor
    proxy_pareto: ParetoSet
    space: SearchSpaceSpec
    acc_pred: AccuracyPredictor

    def __post_init__(self):
        self.proxy_predictor.check_space(self.space)


def build_proxy_state(device_id: str, predictor: LatencyPredictor, space: SearchSpaceSpec,
                      acc_pred: AccuracyPredictor, evo: EvoConfig = EvoConfig()) -> ProxyState:
    """Search once on the proxy predictor and bundle the result."""
    front = sweep_tradeoff(space, acc_pred, predictor.as_fn(space), evo)
    return ProxyState(device_id, predictor, front, space, acc_pred)


@dataclass(frozen=True)
class PipelineConfig:
    srcc_threshold: float = 0.9
    initial_sample_count: int = 50
    validation_count: int = 20
    adaptation_budget: int = 200
    batch_size: int = 25
    reuse_mode: ReuseMode = ReuseMode.RESEARCH_ON_PROXY
    evo: EvoConfig = field(default_factory=EvoConfig)
    lambda_grid: tuple[float, ...] = field(default_factory=default_lambda_grid)
    epsilon_acc: float = DEFAULT_EPSILON_ACC
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if not 0 < self.srcc_threshold <= 1:
            raise ValueError("srcc_threshold must be in (0, 1]")
        for name in ("initial_sample_count", "validation_count", "adaptation_budget", "batch_size"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.initial_sample_count < 2:
            raise ValueError("initial_sample_count must be >= 2")
        object.__setattr__(self, "reuse_mode", ReuseMode(self.reuse_mode))

    @classmethod
    def from_dict(cls, doc: dict, evo: EvoConfig | None = None, seed: int = 0) -> "PipelineConfig":
        doc = dict(doc)
        if "lambda_grid" in doc:
            doc["lambda_grid"] = tuple(float(v) for v in doc["lambda_grid"])
        return cls(evo=evo or EvoConfig(), seed=doc.pop("seed", seed), **doc)


class TargetOracle:
    """Counts every latency query sent to the target device."""

    def __init__(self, device_id: str, space: SearchSpaceSpec, query: Callable[[np.ndarray], np.ndarray]):
        self.device_id = device_id
        self.space = space
        self._query = query
        self.count = 0

    def measure_genes(self, G) -> np.ndarray:
        G = np.atleast_2d(np.asarray(G, dtype=np.int64))
        out = np.asarray(self._query(G), dtype=float)
        self.count += G.shape[0]
        return out

    def measure(self, genotype: Genotype) -> float:
        return float(self.measure_genes(self.space.genes(genotype))[0])

    @classmethod
    def from_predictor(cls, device_id: str, pred: LatencyPredictor, space: SearchSpaceSpec) -> "TargetOracle":
        pred.check_space(space)
        return cls(device_id, space, lambda G: pred.predict_genes(space, G))

    @classmethod
    def from_device(cls, dev: RooflineDevice, space: SearchSpaceSpec) -> "TargetOracle":
        return cls(dev.device_id, space, lambda G: simulate_genes(dev, space, G))

    @classmethod
    def from_measurements(cls, mset: MeasurementSet, space: SearchSpaceSpec) -> "TargetOracle":
        table = {space.key(s.genotype): s.latency_ms for s in mset.samples}

        def query(G):
            out = []
            for row in space.canonical_genes(G):
                key = tuple(int(v) for v in row)
                if key not in table:
                    raise UnknownArchitecture(
                        f"{space.dumps(space.from_genes(row))} is not in the measurement file"
                    )
                out.append(table[key])
            return np.array(out)

        return cls(mset.device_id, space, query)


@dataclass
class PipelineReport:
    branch: str = ""
    srcc_initial: float = float("nan")
    srcc_trace: list = field(default_factory=list)
    measurement_count: int = 0
    adaptation_measurements: int = 0
    candidate_count: int = 0
    front_size: int = 0
    removed: list = field(default_factory=list)
    budget_exhausted: bool = False
    adaptation: dict | None = None
    reuse_mode: str = ""
    seed: int = 0

    def to_dict(self) -> dict:
        return {
            "branch": self.branch,
            "srcc_initial": self.srcc_initial,
            "srcc_values": [row["srcc"] for row in self.srcc_trace],
            "srcc_trace": self.srcc_trace,
            "measurement_count": self.measurement_count,
            "adaptation_measurements": self.adaptation_measurements,
            "candidate_count": self.candidate_count,
            "front_size": self.front_size,
            "removed": self.removed,
            "budget_exhausted": self.budget_exhausted,
            "adaptation": self.adaptation,
            "reuse_mode": self.reuse_mode,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class PipelineResult:
    pareto: ParetoSet
    report: PipelineReport
    candidates: ParetoSet
    operative_predictor: LatencyPredictor


class _Measurements:
    """Target measurements taken so far; a genotype is never measured twice."""

    def __init__(self, oracle: TargetOracle, space: SearchSpaceSpec):
        self.oracle = oracle
        self.space = space
        self.latency: dict[tuple, float] = {}

    def take(self, G) -> np.ndarray:
        C = self.space.canonical_genes(G)
        keys = [tuple(int(v) for v in row) for row in C]
        new = [i for i, k in enumerate(keys) if k not in self.latency]
        # de-duplicate within the batch as well
        first = {}
        for i in new:
            first.setdefault(keys[i], i)
        if first:
            idx = list(first.values())
            vals = self.oracle.measure_genes(C[idx])
            for i, v in zip(idx, vals):
                self.latency[keys[i]] = float(v)
        return np.array([self.latency[k] for k in keys])

    def fresh_genes(self, rng: np.random.Generator, n: int, exclude=()) -> np.ndarray:
        """``n`` distinct canonical genotypes never measured before."""
        seen = set(self.latency) | set(exclude)
        rows = []
        for _ in range(1000):
            for row in self.space.canonical_genes(self.space.sample_genes(rng, max(n, 16))):
                key = tuple(int(v) for v in row)
                if key not in seen:
                    seen.add(key)
                    rows.append(row)
                    if len(rows) == n:
                        return np.array(rows)
        raise BudgetExhausted(f"could not find {n} unmeasured genotypes")


def _safe_srcc(a, b) -> float:
    try:
        return srcc(a, b)
    except DegenerateInput:
        return float("nan")


def one_proxy_nas(state: ProxyState, target: TargetOracle, cfg: PipelineConfig = PipelineConfig()) -> PipelineResult:
    space = state.space
    proxy = state.proxy_predictor
    evo = replace(cfg.evo, seed=cfg.seed, workers=cfg.workers)
    report = PipelineReport(seed=cfg.seed, reuse_mode=cfg.reuse_mode.value)
    meas = _Measurements(target, space)
    start_count = target.count

    def record(stage, rnd, value, n):
        report.srcc_trace.append({"stage": stage, "round": rnd, "srcc": value, "measurements": n})

    # check monotonicity on a small random sample
    rng = np.random.default_rng([cfg.seed, 1])
    G0 = meas.fresh_genes(rng, cfg.initial_sample_count)
    y0 = meas.take(G0)
    s0 = _safe_srcc(proxy.predict_genes(space, G0), y0)
    report.srcc_initial = s0
    record("initial", 0, s0, target.count - start_count)

    operative = proxy
    if s0 >= cfg.srcc_threshold:
        report.branch = "reuse"
        if cfg.reuse_mode is ReuseMode.REUSE_SET:
            candidates = state.proxy_pareto
        else:
            candidates = sweep_tradeoff(space, state.acc_pred, proxy.as_fn(space), evo)
    else:
        report.branch = "adapt"
        operative = _adapt(state, cfg, meas, G0, y0, rng, report, record, start_count)
        candidates = sweep_tradeoff(space, state.acc_pred, operative.as_fn(space), evo)
    report.adaptation_measurements = target.count - start_count

    # measure the candidates and prune with real latencies
    CG = np.stack([space.genes(m.genotype) for m in candidates])
    y = meas.take(CG)
    measured = [ScoredArch(m.genotype, m.accuracy, float(v), LatencySource.MEASURED)
                for m, v in zip(candidates, y)]
    front = remove_non_pareto(measured, cfg.epsilon_acc)
    kept = {space.key(m.genotype) for m in front}
    report.removed = [space.to_json(m.genotype) for m in measured if space.key(m.genotype) not in kept]
    report.candidate_count = len(candidates)
    report.front_size = len(front)
    report.measurement_count = target.count - start_count
    return PipelineResult(front, report, candidates, operative)


def _adapt(state, cfg, meas, G0, y0, rng, report, record, start_count) -> LatencyPredictor:
    space = state.space
    proxy = state.proxy_predictor
    target = meas.oracle
    acfg = AdaptationConfig(lambda_grid=cfg.lambda_grid, validation_count=cfg.validation_count,
                            workers=cfg.workers)
    pool = MeasurementSet(target.device_id, tuple(
        MeasurementSample(space.from_genes(g), float(v)) for g, v in zip(G0, y0)))
    best: tuple[float, LatencyPredictor, AdaptationParams] | None = None
    rnd = 0
    while True:
        rnd += 1
        lam, params, val = tune_lambda(proxy, pool, acfg, space, seed=[cfg.seed, 2, rnd])
        adapted = params.adapted_predictor(proxy)
        used = target.count - start_count
        if used + cfg.batch_size > cfg.adaptation_budget:
            report.budget_exhausted = True
            logger.warning("adaptation budget of %d measurements exhausted", cfg.adaptation_budget)
            if best is None:
                best = (float("nan"), adapted, params)
            break
        # re-check on genotypes that played no part in fitting
        Gr = meas.fresh_genes(rng, cfg.batch_size)
        yr = meas.take(Gr)
        s = _safe_srcc(adapted.predict_genes(space, Gr), yr)
        record("recheck", rnd, s, target.count - start_count)
        if best is None or not s <= best[0]:
            best = (s, adapted, params)
        if s >= cfg.srcc_threshold:
            best = (s, adapted, params)
            break
        pool = pool.extend(MeasurementSample(space.from_genes(g), float(v)) for g, v in zip(Gr, yr))
    s, adapted, params = best
    report.adaptation = {**params.to_dict(), "recheck_srcc": s, "rounds": rnd}
    return adapted


def write_outputs(out_dir, result: PipelineResult, space: SearchSpaceSpec) -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "front": out / "front.csv",
        "svg": out / "front.svg",
        "report": out / "report.json",
        "trace": out / "srcc_trace.csv",
    }
    write_front_csv(paths["front"], result.pareto, space)
    write_front_svg(paths["svg"], list(result.candidates), list(result.pareto), "measured front")
    paths["report"].write_text(json.dumps(result.report.to_dict(), indent=1), encoding="utf-8")
    with open(paths["trace"], "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["stage", "round", "srcc", "measurements"])
        for row in result.report.srcc_trace:
            w.writerow([row["stage"], row["round"], repr(row["srcc"]), row["measurements"]])
    return paths


def ingest_measurements(path, space: SearchSpaceSpec, device_id: str | None = None) -> MeasurementSet:
    return read_measurements(path, space, device_id)


# run-config plumbing ------------------------------------------------------

def _resolve(ref, root: Path):
    if isinstance(ref, str):
        p = Path(ref)
        return p if p.is_absolute() else root / p
    return ref


def _load_json(ref, root: Path) -> dict:
    ref = _resolve(ref, root)
    if isinstance(ref, dict):
        return ref
    try:
        return json.loads(Path(ref).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"{ref}: {exc}") from None


def load_predictor_ref(ref, space: SearchSpaceSpec, root: Path) -> LatencyPredictor:
    """A predictor JSON path, an inline predictor, or ``{"device": profile}``."""
    doc = _load_json(ref, root)
    if "device" in doc:
        dev = RooflineDevice.from_dict(_load_json(doc["device"], root))
        return roofline_predictor(dev, space, include_fixed=doc.get("include_fixed", True))
    return LatencyPredictor.from_dict(doc)


def load_accuracy(doc, space: SearchSpaceSpec, root: Path) -> AccuracyPredictor:
    doc = dict(doc or {})
    if doc.get("kind", "synthetic").lower() == "tabular":
        return load_table(_resolve(doc["path"], root), space)
    return synthetic(space, a_max=doc.get("a_max", 0.80), f0=doc.get("f0"),
                     jitter_sigma=doc.get("jitter_sigma", 0.005), seed=doc.get("seed", 0))


def load_target(doc: dict, space: SearchSpaceSpec, root: Path) -> TargetOracle:
    kind = doc.get("kind")
    if kind == "file":
        return TargetOracle.from_measurements(
            read_measurements(_resolve(doc["path"], root), space, doc.get("device_id")), space)
    if kind != "simulator":
        raise ParseError(f"target kind must be 'simulator' or 'file', got {kind!r}")
    if "family" in doc:
        fam = SyntheticDeviceFamilySpec.from_dict(_load_json(doc["family"], root), root)
        member = int(doc.get("member", 0))
        pred = generate_family(replace(fam, member_count=member + 1))[member]
        return TargetOracle.from_predictor(doc.get("device_id", f"family-{member}"), pred, space)
    if "predictor" in doc:
        pred = load_predictor_ref(doc["predictor"], space, root)
        return TargetOracle.from_predictor(doc.get("device_id", "target"), pred, space)
    if "device" in doc:
        dev = RooflineDevice.from_dict(_load_json(doc["device"], root))
        return TargetOracle.from_device(dev, space)
    raise ParseError("simulator target needs 'family', 'predictor' or 'device'")


@dataclass(frozen=True)
class RunConfig:
    state: ProxyState
    target: TargetOracle
    pipeline: PipelineConfig


def load_run_config(path, seed: int | None = None, workers: int = 1) -> RunConfig:
    path = Path(path)
    root = path.parent
    doc = _load_json(str(path.resolve()), root)
    try:
        run_seed = int(doc.get("seed", 0) if seed is None else seed)
        sref = doc["space"]
        space = load_space(sref if isinstance(sref, str) and sref in BUILTIN_SPACES else _resolve(sref, root))
        proxy = load_predictor_ref(doc["proxy_predictor"], space, root)
        acc = load_accuracy(doc.get("accuracy"), space, root)
        evo = EvoConfig.from_dict(doc.get("evo", {}))
        pcfg = PipelineConfig.from_dict(doc.get("pipeline", {}), evo=evo, seed=run_seed)
        pcfg = replace(pcfg, seed=run_seed, workers=workers)
        target = load_target(doc["target"], space, root)
    except (KeyError, TypeError) as exc:
        raise ParseError(f"bad run config: {exc}") from None
    proxy_id = doc.get("proxy_device_id", "proxy")
    if pcfg.reuse_mode is ReuseMode.REUSE_SET:
        state = build_proxy_state(proxy_id, proxy, space, acc, replace(evo, seed=run_seed, workers=workers))
    else:
        # the stored set is not consulted when re-searching
        state = ProxyState(proxy_id, proxy, ParetoSet(()), space, acc)
    return RunConfig(state, target, pcfg)
