"""Architecture families, genotypes, one-hot encodings and cost statistics.

Three families are supported:

* ``MbV2Like``: 5 stages of up to 4 inverted-residual blocks plus one fixed
  block (21 searchable blocks). Each block picks a kernel size and an
  expansion ratio; each stage picks a depth in {2, 3, 4}. The first ``depth``
  blocks of a stage are active, trailing blocks are inactive.
* ``FbNetLike``: 22 searchable blocks, 8 operator candidates plus Skip.
* ``CellLike``: a NAS-Bench-201 style cell whose edges each pick one of 5
  operations.

Every genotype is also a flat integer gene vector (see ``SearchSpaceSpec.genes``).
Evolutionary search and exhaustive enumeration work on gene matrices, so the
vectorized helpers here accept ``(n, n_genes)`` integer arrays.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from typing import Iterator, Sequence

import numpy as np

from .errors import InvalidGenotype, MalformedEncoding, ParseError, SpaceTooLarge

DEFAULT_ENUMERATION_CAP = 10**6
SPEC_VERSION = 1


class SpaceKind(str, Enum):
    MBV2 = "MbV2Like"
    FBNET = "FbNetLike"
    CELL = "CellLike"


@dataclass(frozen=True)
class Genotype:
    """Choice indices identifying one architecture.

    Only the fields of the owning space's kind are populated: ``kernel``,
    ``expansion`` and ``depth`` for MbV2Like, ``blocks`` for FbNetLike
    (index ``n_slots`` means Skip), ``edges`` for CellLike. ``depth`` holds
    indices into the depth candidate list, not depths.
    """

    kernel: tuple[int, ...] = ()
    expansion: tuple[int, ...] = ()
    depth: tuple[int, ...] = ()
    blocks: tuple[int, ...] = ()
    edges: tuple[int, ...] = ()


@dataclass(frozen=True)
class ArchStats:
    flops: float
    bytes: float

    @property
    def operational_intensity(self) -> float:
        return self.flops / self.bytes


@dataclass(frozen=True, eq=False)
class SearchSpaceSpec:
    """A search space and its per-(position, choice) cost table.

    ``choices`` labels the one-hot slots of a position group; FbNetLike's Skip
    has no slot (it encodes as an all-zero group). ``cost_flops`` and
    ``cost_bytes`` have shape ``(positions, len(choices))``. ``fixed_cost`` is
    the (flops, bytes) of the non-searchable part of the network; it is not
    included in ``arch_stats`` and only seeds default predictor biases.
    """

    kind: SpaceKind
    space_id: str
    choices: tuple[str, ...]
    cost_flops: np.ndarray
    cost_bytes: np.ndarray
    stage_count: int = 0
    max_blocks_per_stage: int = 0
    fixed_block_count: int = 0
    depth_values: tuple[int, ...] = ()
    kernel_values: tuple[int, ...] = ()
    expansion_values: tuple[int, ...] = ()
    skip_label: str = "skip"
    fixed_cost: tuple[float, float] = (0.0, 0.0)
    enumeration_cap: int = DEFAULT_ENUMERATION_CAP
    _gene_sizes: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        flops = np.asarray(self.cost_flops, dtype=float)
        nbytes = np.asarray(self.cost_bytes, dtype=float)
        if flops.shape != nbytes.shape or flops.ndim != 2:
            raise ValueError("cost tables must share a 2-D shape")
        if flops.shape[1] != len(self.choices):
            raise ValueError("cost table width must equal the number of choices")
        if not (np.all(flops > 0) and np.all(nbytes > 0)):
            raise ValueError("cost table entries must be strictly positive")
        flops.setflags(write=False)
        nbytes.setflags(write=False)
        object.__setattr__(self, "cost_flops", flops)
        object.__setattr__(self, "cost_bytes", nbytes)
        P = flops.shape[0]
        if self.kind is SpaceKind.MBV2:
            if P != self.stage_count * self.max_blocks_per_stage + self.fixed_block_count:
                raise ValueError("MbV2Like position count does not match stage layout")
            if len(self.choices) != len(self.kernel_values) * len(self.expansion_values):
                raise ValueError("MbV2Like choices must be kernel x expansion")
            sizes = (
                [len(self.kernel_values)] * P
                + [len(self.expansion_values)] * P
                + [len(self.depth_values)] * self.stage_count
            )
        elif self.kind is SpaceKind.FBNET:
            sizes = [len(self.choices) + 1] * P
        else:
            sizes = [len(self.choices)] * P
        gs = np.array(sizes, dtype=np.int64)
        gs.setflags(write=False)
        object.__setattr__(self, "_gene_sizes", gs)

    # -- shape -------------------------------------------------------------

    @property
    def positions(self) -> int:
        return self.cost_flops.shape[0]

    @property
    def n_slots(self) -> int:
        return len(self.choices)

    @property
    def encoding_length(self) -> int:
        """K + 1: one-hot features plus the constant bias feature."""
        return self.positions * self.n_slots + 1

    @property
    def gene_sizes(self) -> np.ndarray:
        return self._gene_sizes

    @property
    def n_genes(self) -> int:
        return len(self._gene_sizes)

    @property
    def cell_edge_count(self) -> int:
        return self.positions if self.kind is SpaceKind.CELL else 0

    def size(self) -> int:
        """Number of distinct canonical genotypes."""
        if self.kind is SpaceKind.MBV2:
            per_stage = sum(self.n_slots**d for d in self.depth_values)
            return per_stage**self.stage_count * self.n_slots**self.fixed_block_count
        return math.prod(int(s) for s in self._gene_sizes)

    # -- genes <-> genotype -------------------------------------------------

    def genes(self, g: Genotype) -> np.ndarray:
        if self.kind is SpaceKind.MBV2:
            parts = (g.kernel, g.expansion, g.depth)
        elif self.kind is SpaceKind.FBNET:
            parts = (g.blocks,)
        else:
            parts = (g.edges,)
        arr = np.fromiter(itertools.chain(*parts), dtype=np.int64)
        if arr.shape[0] != self.n_genes:
            raise InvalidGenotype(
                f"genotype has {arr.shape[0]} genes, {self.space_id} expects {self.n_genes}"
            )
        if np.any(arr < 0) or np.any(arr >= self._gene_sizes):
            raise InvalidGenotype(f"gene index out of range for {self.space_id}")
        return arr

    def from_genes(self, genes: Sequence[int]) -> Genotype:
        vals = tuple(int(v) for v in genes)
        if self.kind is SpaceKind.MBV2:
            P = self.positions
            return Genotype(kernel=vals[:P], expansion=vals[P : 2 * P], depth=vals[2 * P :])
        if self.kind is SpaceKind.FBNET:
            return Genotype(blocks=vals)
        return Genotype(edges=vals)

    def validate(self, g: Genotype) -> None:
        self.genes(g)

    # -- vectorized core -----------------------------------------------------

    def _check_matrix(self, G) -> np.ndarray:
        G = np.asarray(G, dtype=np.int64)
        if G.ndim == 1:
            G = G[None, :]
        if G.shape[1] != self.n_genes:
            raise InvalidGenotype(f"expected {self.n_genes} genes per row, got {G.shape[1]}")
        if np.any(G < 0) or np.any(G >= self._gene_sizes):
            raise InvalidGenotype(f"gene index out of range for {self.space_id}")
        return G

    def slots_and_mask(self, G) -> tuple[np.ndarray, np.ndarray]:
        """Per-position one-hot slot index and activity mask, each ``(n, P)``."""
        G = self._check_matrix(G)
        P = self.positions
        if self.kind is SpaceKind.MBV2:
            n_e = len(self.expansion_values)
            slots = G[:, :P] * n_e + G[:, P : 2 * P]
            depth = np.asarray(self.depth_values)[G[:, 2 * P :]]
            pos = np.arange(P)
            stage = np.minimum(pos // self.max_blocks_per_stage, self.stage_count - 1)
            within = pos % self.max_blocks_per_stage
            searchable = pos < self.stage_count * self.max_blocks_per_stage
            active = ~searchable[None, :] | (within[None, :] < depth[:, stage])
            return slots, active
        if self.kind is SpaceKind.FBNET:
            active = G != self.n_slots
            return np.where(active, G, 0), active
        return G, np.ones_like(G, dtype=bool)

    def canonical_genes(self, G) -> np.ndarray:
        """Normalize inactive-block choices to index 0."""
        G = self._check_matrix(G).copy()
        if self.kind is SpaceKind.MBV2:
            _, active = self.slots_and_mask(G)
            P = self.positions
            G[:, :P][~active] = 0
            G[:, P : 2 * P][~active] = 0
        return G

    def encode_genes(self, G) -> np.ndarray:
        slots, active = self.slots_and_mask(G)
        n, P = slots.shape
        X = np.zeros((n, self.encoding_length))
        cols = np.arange(P)[None, :] * self.n_slots + slots
        rows = np.broadcast_to(np.arange(n)[:, None], cols.shape)
        X[rows[active], cols[active]] = 1.0
        X[:, -1] = 1.0
        return X

    def stats_genes(self, G) -> tuple[np.ndarray, np.ndarray]:
        slots, active = self.slots_and_mask(G)
        pos = np.arange(self.positions)[None, :]
        # sorted summation: the same multiset of blocks gives identical totals
        flops = np.sort(np.where(active, self.cost_flops[pos, slots], 0.0), axis=1).sum(axis=1)
        nbytes = np.sort(np.where(active, self.cost_bytes[pos, slots], 0.0), axis=1).sum(axis=1)
        return flops, nbytes

    def sample_genes(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.integers(0, self._gene_sizes, size=(n, self.n_genes))

    # -- genotype-level helpers ----------------------------------------------

    def canonical(self, g: Genotype) -> Genotype:
        return self.from_genes(self.canonical_genes(self.genes(g))[0])

    def key(self, g: Genotype) -> tuple[int, ...]:
        return tuple(int(v) for v in self.canonical_genes(self.genes(g))[0])

    def to_json(self, g: Genotype) -> dict:
        """Human-readable genotype (values, not indices)."""
        self.validate(g)
        if self.kind is SpaceKind.MBV2:
            return {
                "kernel_size": [self.kernel_values[i] for i in g.kernel],
                "expansion_ratio": [self.expansion_values[i] for i in g.expansion],
                "depth": [self.depth_values[i] for i in g.depth],
            }
        if self.kind is SpaceKind.FBNET:
            labels = self.choices + (self.skip_label,)
            return {"blocks": [labels[i] for i in g.blocks]}
        return {"edges": [self.choices[i] for i in g.edges]}

    def from_json(self, obj) -> Genotype:
        if isinstance(obj, str):
            try:
                obj = json.loads(obj)
            except json.JSONDecodeError as exc:
                raise ParseError(f"genotype is not valid JSON: {exc}") from None
        if not isinstance(obj, dict):
            raise ParseError("genotype JSON must be an object")

        def lookup(values, seq, name):
            try:
                return tuple(values.index(v) for v in seq)
            except (ValueError, TypeError):
                raise InvalidGenotype(f"unknown {name} value in {seq!r}") from None

        try:
            if self.kind is SpaceKind.MBV2:
                g = Genotype(
                    kernel=lookup(self.kernel_values, obj["kernel_size"], "kernel_size"),
                    expansion=lookup(
                        self.expansion_values, obj["expansion_ratio"], "expansion_ratio"
                    ),
                    depth=lookup(self.depth_values, obj["depth"], "depth"),
                )
            elif self.kind is SpaceKind.FBNET:
                labels = self.choices + (self.skip_label,)
                g = Genotype(blocks=lookup(labels, obj["blocks"], "block"))
            else:
                g = Genotype(edges=lookup(self.choices, obj["edges"], "edge op"))
        except KeyError as exc:
            raise ParseError(f"genotype JSON missing key {exc}") from None
        self.validate(g)
        return g

    def dumps(self, g: Genotype) -> str:
        return json.dumps(self.to_json(g), separators=(",", ":"))

    # -- spec document ------------------------------------------------------

    def to_dict(self) -> dict:
        table = [
            [p, c, float(self.cost_flops[p, c]), float(self.cost_bytes[p, c])]
            for p in range(self.positions)
            for c in range(self.n_slots)
        ]
        doc = {
            "version": SPEC_VERSION,
            "kind": self.kind.value,
            "space_id": self.space_id,
            "stages": {
                "stage_count": self.stage_count,
                "max_blocks_per_stage": self.max_blocks_per_stage,
                "fixed_block_count": self.fixed_block_count,
                "depths": list(self.depth_values),
                "positions": self.positions,
            },
            "choices": list(self.choices),
            "kernel_sizes": list(self.kernel_values),
            "expansion_ratios": list(self.expansion_values),
            "skip_label": self.skip_label,
            "fixed_cost": list(self.fixed_cost),
            "cost_table": table,
        }
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "SearchSpaceSpec":
        try:
            if doc.get("version", SPEC_VERSION) != SPEC_VERSION:
                raise ParseError(f"unsupported space document version {doc['version']}")
            kind = SpaceKind(doc["kind"])
            stages = doc.get("stages", {})
            choices = tuple(doc["choices"])
            P = int(stages["positions"])
            flops = np.full((P, len(choices)), np.nan)
            nbytes = np.full((P, len(choices)), np.nan)
            for p, c, f, b in doc["cost_table"]:
                flops[int(p), int(c)] = f
                nbytes[int(p), int(c)] = b
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, ParseError):
                raise
            raise ParseError(f"bad search space document: {exc}") from None
        if np.isnan(flops).any() or np.isnan(nbytes).any():
            raise ParseError("cost_table does not cover every (position, choice) pair")
        try:
            return cls(
                kind=kind,
                space_id=doc["space_id"],
                choices=choices,
                cost_flops=flops,
                cost_bytes=nbytes,
                stage_count=int(stages.get("stage_count", 0)),
                max_blocks_per_stage=int(stages.get("max_blocks_per_stage", 0)),
                fixed_block_count=int(stages.get("fixed_block_count", 0)),
                depth_values=tuple(stages.get("depths", ())),
                kernel_values=tuple(doc.get("kernel_sizes", ())),
                expansion_values=tuple(doc.get("expansion_ratios", ())),
                skip_label=doc.get("skip_label", "skip"),
                fixed_cost=tuple(doc.get("fixed_cost", (0.0, 0.0))),
            )
        except ValueError as exc:
            raise ParseError(f"bad search space document: {exc}") from None


# ---------------------------------------------------------------------------
# Operations


def encode(genotype: Genotype, space: SearchSpaceSpec) -> np.ndarray:
    """One-hot encoding of length K+1; inactive blocks are all-zero groups."""
    return space.encode_genes(space.genes(genotype))[0]


def decode(encoding, space: SearchSpaceSpec) -> Genotype:
    """Inverse of :func:`encode` onto canonical genotypes."""
    x = np.asarray(encoding, dtype=float)
    if x.shape != (space.encoding_length,):
        raise MalformedEncoding(
            f"encoding length {x.shape} != ({space.encoding_length},) for {space.space_id}"
        )
    if x[-1] != 1.0:
        raise MalformedEncoding("bias feature must be 1")
    body = x[:-1]
    if not np.all((body == 0.0) | (body == 1.0)):
        raise MalformedEncoding("features must be binary")
    groups = body.reshape(space.positions, space.n_slots)
    counts = groups.sum(axis=1)
    if np.any(counts > 1):
        raise MalformedEncoding("a position group has more than one set bit")
    active = counts == 1
    slots = np.where(active, groups.argmax(axis=1), 0)

    if space.kind is SpaceKind.CELL:
        if not np.all(active):
            raise MalformedEncoding("every cell edge needs exactly one operation")
        return Genotype(edges=tuple(int(s) for s in slots))
    if space.kind is SpaceKind.FBNET:
        return Genotype(blocks=tuple(int(s) if a else space.n_slots for s, a in zip(slots, active)))

    n_e = len(space.expansion_values)
    m = space.max_blocks_per_stage
    depth_idx = []
    for s in range(space.stage_count):
        pattern = active[s * m : (s + 1) * m]
        d = int(pattern.sum())
        if not np.all(pattern[:d]) or d not in space.depth_values:
            raise MalformedEncoding(
                f"stage {s}: active blocks must be a prefix of length in {space.depth_values}"
            )
        depth_idx.append(space.depth_values.index(d))
    if not np.all(active[space.stage_count * m :]):
        raise MalformedEncoding("fixed blocks must be active")
    return Genotype(
        kernel=tuple(int(v) for v in slots // n_e),
        expansion=tuple(int(v) for v in slots % n_e),
        depth=tuple(depth_idx),
    )


def random_sample(space: SearchSpaceSpec, seed) -> Genotype:
    rng = np.random.default_rng(seed)
    return space.from_genes(space.sample_genes(rng, 1)[0])


def enumerate_genes(space: SearchSpaceSpec, cap: int | None = None) -> np.ndarray:
    """All canonical genotypes as a gene matrix, in lexicographic gene order."""
    cap = space.enumeration_cap if cap is None else cap
    total = space.size()
    if total > cap:
        raise SpaceTooLarge(f"{space.space_id} has {total} genotypes, cap is {cap}")
    if space.kind is not SpaceKind.MBV2:
        grids = np.meshgrid(*[np.arange(s) for s in space.gene_sizes], indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=1).astype(np.int64)
    # MbV2: only active blocks vary; inactive ones stay at the canonical 0.
    rows = []
    P = space.positions
    n_e = len(space.expansion_values)
    for depth_idx in itertools.product(range(len(space.depth_values)), repeat=space.stage_count):
        base = np.zeros(space.n_genes, dtype=np.int64)
        base[2 * P :] = depth_idx
        _, active = space.slots_and_mask(base)
        act = np.flatnonzero(active[0])
        for combo in itertools.product(range(space.n_slots), repeat=len(act)):
            row = base.copy()
            c = np.asarray(combo)
            row[act] = c // n_e
            row[P + act] = c % n_e
            rows.append(row)
    return np.array(rows, dtype=np.int64)


def enumerate_space(space: SearchSpaceSpec, cap: int | None = None) -> Iterator[Genotype]:
    for row in enumerate_genes(space, cap):
        yield space.from_genes(row)


def arch_stats(genotype: Genotype, space: SearchSpaceSpec) -> ArchStats:
    flops, nbytes = space.stats_genes(space.genes(genotype))
    return ArchStats(float(flops[0]), float(nbytes[0]))


# ---------------------------------------------------------------------------
# Default spaces built from shipped backbone files


def _load_backbone(name: str) -> dict:
    text = resources.files("oneproxy.data").joinpath(name).read_text(encoding="utf-8")
    return json.loads(text)


def _inverted_residual_cost(h_in, h_out, c_in, c_out, k, e, group, bpe, traffic):
    # flops: 2*H*W*C_in*e*(C_in/g + k^2 + C_out/g) on the output grid
    mid = c_in * e
    flops = 2.0 * h_out * h_out * mid * (c_in / group + k * k + c_out / group)
    params = mid * c_in / group + mid * k * k + mid * c_out / group
    # input/output activations of expand, depthwise and project layers
    acts = h_in * h_in * (c_in + 2 * mid) + h_out * h_out * (2 * mid + c_out)
    return flops, bpe * (params + traffic * acts)


def mbv2_space(enumeration_cap: int = DEFAULT_ENUMERATION_CAP) -> SearchSpaceSpec:
    cfg = _load_backbone("mbv2_backbone.json")
    kernels, exps = cfg["kernel_sizes"], cfg["expansion_ratios"]
    m = cfg["max_blocks_per_stage"]
    layout = []  # (h_in, h_out, c_in, c_out)
    res, c = cfg["input_resolution"], cfg["input_channels"]
    for st in cfg["stages"]:
        h_out = res // st["stride"]
        for j in range(m):
            layout.append((res if j == 0 else h_out, h_out, c if j == 0 else st["width"], st["width"]))
        res //= st["stride"]
        c = st["width"]
    for fb in cfg["fixed_blocks"]:
        layout.append((res, res // fb["stride"], c, fb["width"]))
        res //= fb["stride"]
        c = fb["width"]
    choices = [(k, e) for k in kernels for e in exps]
    flops = np.zeros((len(layout), len(choices)))
    nbytes = np.zeros_like(flops)
    for p, (hi, ho, ci, co) in enumerate(layout):
        for q, (k, e) in enumerate(choices):
            flops[p, q], nbytes[p, q] = _inverted_residual_cost(
                hi, ho, ci, co, k, e, 1, cfg["bytes_per_element"], cfg["activation_traffic"]
            )
    ns = cfg["non_searchable"]
    return SearchSpaceSpec(
        kind=SpaceKind.MBV2,
        space_id="mbv2-v1",
        choices=tuple(f"k{k}_e{e}" for k, e in choices),
        cost_flops=flops,
        cost_bytes=nbytes,
        stage_count=len(cfg["stages"]),
        max_blocks_per_stage=m,
        fixed_block_count=len(cfg["fixed_blocks"]),
        depth_values=tuple(cfg["depths"]),
        kernel_values=tuple(kernels),
        expansion_values=tuple(exps),
        fixed_cost=(ns["flops"], ns["bytes"]),
        enumeration_cap=enumeration_cap,
    )


def fbnet_space(enumeration_cap: int = DEFAULT_ENUMERATION_CAP) -> SearchSpaceSpec:
    cfg = _load_backbone("fbnet_backbone.json")
    layout = []
    res, c = cfg["input_resolution"], cfg["input_channels"]
    for st in cfg["stages"]:
        for j in range(st["blocks"]):
            s = st["stride"] if j == 0 else 1
            layout.append((res, res // s, c, st["width"]))
            res //= s
            c = st["width"]
    cands = cfg["candidates"]
    flops = np.zeros((len(layout), len(cands)))
    nbytes = np.zeros_like(flops)
    for p, (hi, ho, ci, co) in enumerate(layout):
        for q, cd in enumerate(cands):
            flops[p, q], nbytes[p, q] = _inverted_residual_cost(
                hi, ho, ci, co, cd["kernel"], cd["expansion"], cd["group"],
                cfg["bytes_per_element"], cfg["activation_traffic"],
            )
    ns = cfg["non_searchable"]
    return SearchSpaceSpec(
        kind=SpaceKind.FBNET,
        space_id="fbnet-v1",
        choices=tuple(cd["label"] for cd in cands),
        cost_flops=flops,
        cost_bytes=nbytes,
        skip_label=cfg["skip_label"],
        fixed_cost=(ns["flops"], ns["bytes"]),
        enumeration_cap=enumeration_cap,
    )


def _cell_op_cost(op, c, h, bpe):
    hw = h * h
    if op == "none":
        return hw * c, bpe * hw * c
    if op == "skip_connect":
        return hw * c, bpe * 2 * hw * c
    if op == "nor_conv_1x1":
        return 2.0 * hw * c * c + 2 * hw * c, bpe * (c * c + 2 * hw * c)
    if op == "nor_conv_3x3":
        return 2.0 * hw * c * c * 9 + 2 * hw * c, bpe * (9 * c * c + 2 * hw * c)
    if op == "avg_pool_3x3":
        return 9.0 * hw * c, bpe * 2 * hw * c
    raise ValueError(f"unknown cell operation {op!r}")


def cell_space(edges: int = 6, enumeration_cap: int = DEFAULT_ENUMERATION_CAP) -> SearchSpaceSpec:
    if edges not in (4, 6):
        raise ValueError("cell_edge_count must be 4 or 6")
    cfg = _load_backbone("cell_backbone.json")
    ops = cfg["operations"]
    row_f = np.zeros(len(ops))
    row_b = np.zeros(len(ops))
    for st in cfg["stages"]:
        for q, op in enumerate(ops):
            f, b = _cell_op_cost(op, st["channels"], st["resolution"], cfg["bytes_per_element"])
            row_f[q] += st["cells"] * f
            row_b[q] += st["cells"] * b
    ns = cfg["non_searchable"]
    return SearchSpaceSpec(
        kind=SpaceKind.CELL,
        space_id=f"cell{edges}-v1",
        choices=tuple(ops),
        cost_flops=np.tile(row_f, (edges, 1)),
        cost_bytes=np.tile(row_b, (edges, 1)),
        fixed_cost=(ns["flops"], ns["bytes"]),
        enumeration_cap=enumeration_cap,
    )


BUILTIN_SPACES = {
    "mbv2": mbv2_space,
    "fbnet": fbnet_space,
    "cell": cell_space,
    "cell6": lambda: cell_space(6),
    "cell4": lambda: cell_space(4),
}


def load_space(ref) -> SearchSpaceSpec:
    """Resolve a built-in name, a JSON path, or an inline document."""
    if isinstance(ref, SearchSpaceSpec):
        return ref
    if isinstance(ref, dict):
        return SearchSpaceSpec.from_dict(ref)
    ref = str(ref)
    if ref in BUILTIN_SPACES:
        return BUILTIN_SPACES[ref]()
    try:
        with open(ref, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{ref}: {exc}") from None
    return SearchSpaceSpec.from_dict(doc)
