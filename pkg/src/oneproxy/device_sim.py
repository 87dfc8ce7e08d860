"""Roofline-model devices and synthetic device families.

These stand in for physical hardware: a ``RooflineDevice`` gives a
ground-truth latency for any genotype, and ``generate_family`` derives target
predictors from a base predictor through a global scale plus sparse
per-operator multipliers.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import InvalidGenotype, ParseError
from .latency_model import LatencyPredictor
from .search_space import Genotype, SearchSpaceSpec


class Granularity(str, Enum):
    WHOLE_MODEL = "WholeModel"
    PER_OPERATOR = "PerOperator"


@dataclass(frozen=True)
class RooflineDevice:
    device_id: str
    peak_gflops: float
    bandwidth_gbps: float
    efficiency: float = 1.0
    granularity: Granularity = Granularity.WHOLE_MODEL

    def __post_init__(self):
        if not (self.peak_gflops > 0 and self.bandwidth_gbps > 0):
            raise ValueError("peak_gflops and bandwidth_gbps must be positive")
        if not 0 < self.efficiency <= 1:
            raise ValueError("efficiency must be in (0, 1]")
        object.__setattr__(self, "granularity", Granularity(self.granularity))

    @property
    def attainable_gflops(self) -> float:
        return self.peak_gflops * self.efficiency

    def to_dict(self) -> dict:
        d = asdict(self)
        d["granularity"] = self.granularity.value
        return d

    @classmethod
    def from_dict(cls, doc: dict) -> "RooflineDevice":
        try:
            return cls(
                device_id=doc["device_id"],
                peak_gflops=float(doc["peak_gflops"]),
                bandwidth_gbps=float(doc["bandwidth_gbps"]),
                efficiency=float(doc.get("efficiency", 1.0)),
                granularity=doc.get("granularity", Granularity.WHOLE_MODEL.value),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"bad device profile: {exc}") from None

    @classmethod
    def load(cls, path) -> "RooflineDevice":
        try:
            return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}: {exc}") from None


# Published peak compute and memory bandwidth of two mobile tablets.
S5E = RooflineDevice("S5e", 40.6, 14.93)
TABA = RooflineDevice("TabA", 15.3, 7.46)
LENOVO = RooflineDevice("Lenovo", 26.5, 7.5)


def ridge_point(dev: RooflineDevice) -> float:
    """Operational intensity (FLOPs/Byte) where the roofline bends."""
    return dev.attainable_gflops / dev.bandwidth_gbps


def _roofline_ms(dev: RooflineDevice, flops, nbytes):
    compute_s = np.asarray(flops, dtype=float) / (dev.attainable_gflops * 1e9)
    memory_s = np.asarray(nbytes, dtype=float) / (dev.bandwidth_gbps * 1e9)
    return np.maximum(compute_s, memory_s) * 1e3


def roofline_latency_ms(dev: RooflineDevice, flops, nbytes):
    """Roofline latency for raw FLOP and byte counts (scalar or array)."""
    out = _roofline_ms(dev, flops, nbytes)
    return float(out) if np.ndim(out) == 0 else out


def simulate_genes(dev: RooflineDevice, space: SearchSpaceSpec, G) -> np.ndarray:
    if dev.granularity is Granularity.WHOLE_MODEL:
        flops, nbytes = space.stats_genes(G)
        if np.any(flops <= 0):
            raise InvalidGenotype("genotype has no active block")
        return _roofline_ms(dev, flops, nbytes)
    slots, active = space.slots_and_mask(G)
    if not np.all(active.any(axis=1)):
        raise InvalidGenotype("genotype has no active block")
    per_op = _roofline_ms(dev, space.cost_flops, space.cost_bytes)
    pos = np.arange(space.positions)[None, :]
    return np.sort(np.where(active, per_op[pos, slots], 0.0), axis=1).sum(axis=1)


def simulate_latency(dev: RooflineDevice, genotype: Genotype, space: SearchSpaceSpec) -> float:
    return float(simulate_genes(dev, space, space.genes(genotype))[0])


def roofline_predictor(
    dev: RooflineDevice, space: SearchSpaceSpec, include_fixed: bool = True
) -> LatencyPredictor:
    """Operator-level predictor whose weights are per-operator roofline latencies.

    With ``include_fixed=False`` it reproduces a PerOperator device exactly.
    The bias is the roofline latency of the space's non-searchable part.
    """
    per_op = _roofline_ms(dev, space.cost_flops, space.cost_bytes)
    bias = float(_roofline_ms(dev, *space.fixed_cost)) if include_fixed else 0.0
    return LatencyPredictor(np.r_[per_op.ravel(), bias], space.space_id)


@dataclass(frozen=True, eq=False)
class SyntheticDeviceFamilySpec:
    base_weights: LatencyPredictor
    member_count: int
    global_scale_range: tuple[float, float] = (0.5, 2.0)
    perturb_fraction: float = 0.0
    perturb_range: tuple[float, float] = (0.2, 5.0)
    seed: int = 0

    def __post_init__(self):
        lo, hi = self.global_scale_range
        plo, phi = self.perturb_range
        if not (0 < lo <= hi and 0 < plo <= phi):
            raise ValueError("scale and perturb ranges need 0 < lo <= hi")
        if not 0 <= self.perturb_fraction <= 1:
            raise ValueError("perturb_fraction must be in [0, 1]")
        if self.member_count < 0:
            raise ValueError("member_count must be nonnegative")

    def to_dict(self, base_path: str | None = None) -> dict:
        doc = {
            "member_count": self.member_count,
            "global_scale_range": list(self.global_scale_range),
            "perturb_fraction": self.perturb_fraction,
            "perturb_range": list(self.perturb_range),
            "seed": self.seed,
        }
        if base_path is not None:
            doc["base_predictor"] = base_path
        else:
            doc["base_predictor"] = self.base_weights.to_dict()
        return doc

    @classmethod
    def from_dict(cls, doc: dict, root: Path | None = None) -> "SyntheticDeviceFamilySpec":
        try:
            base = doc["base_predictor"]
            if isinstance(base, str):
                p = Path(base)
                if root is not None and not p.is_absolute():
                    p = root / p
                base = LatencyPredictor.load(p)
            else:
                base = LatencyPredictor.from_dict(base)
            return cls(
                base_weights=base,
                member_count=int(doc["member_count"]),
                global_scale_range=tuple(doc.get("global_scale_range", (0.5, 2.0))),
                perturb_fraction=float(doc.get("perturb_fraction", 0.0)),
                perturb_range=tuple(doc.get("perturb_range", (0.2, 5.0))),
                seed=int(doc.get("seed", 0)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, ParseError):
                raise
            raise ParseError(f"bad family spec: {exc}") from None


def family_member_params(spec: SyntheticDeviceFamilySpec, index: int) -> tuple[float, np.ndarray]:
    """The (alpha, b) pair generating member ``index``."""
    w = spec.base_weights.weights
    rng = np.random.default_rng([spec.seed, index])
    alpha = float(rng.uniform(*spec.global_scale_range))
    b = np.zeros_like(w)
    n_perturb = int(round(spec.perturb_fraction * w.shape[0]))
    if n_perturb:
        coords = rng.choice(w.shape[0], size=n_perturb, replace=False)
        lo, hi = np.log(spec.perturb_range[0]), np.log(spec.perturb_range[1])
        multiplier = np.exp(rng.uniform(lo, hi, size=n_perturb))
        # perturbed coordinate's effective scale is alpha * multiplier
        b[coords] = alpha * (multiplier - 1.0)
    return alpha, b


def generate_family(spec: SyntheticDeviceFamilySpec) -> list[LatencyPredictor]:
    base = spec.base_weights
    out = []
    for i in range(spec.member_count):
        alpha, b = family_member_params(spec, i)
        out.append(LatencyPredictor((alpha + b) * base.weights, base.space_id))
    return out
