"""Binary exposure lattice, hypothesis DAG, polyforests and upward closure.

Profiles are stored as integers with coordinate 1 in the most significant of
``dimension`` bits, so the textual form ``"0101"`` reads coordinate 1
leftmost and integer order coincides with lexicographic order of the strings.
"""
from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

import numpy as np

__all__ = [
    "MAX_DIMENSION",
    "BinaryProfile",
    "as_profile",
    "leq",
    "Strategy",
    "HypothesisDag",
    "build_dag",
    "covers",
    "derive_polyforest",
    "leaf_shares",
    "TraceEntry",
    "RejectionSet",
    "Subgroup",
    "upward_closure",
]

MAX_DIMENSION = 32


@dataclass(frozen=True)
class BinaryProfile:
    value: int
    dimension: int

    def __post_init__(self):
        if not 1 <= self.dimension <= MAX_DIMENSION:
            raise ValueError(f"dimension must be in [1, {MAX_DIMENSION}], got {self.dimension}")
        if not 0 <= self.value < (1 << self.dimension):
            raise ValueError(f"value {self.value} does not fit in {self.dimension} bits")

    @classmethod
    def parse(cls, text: str) -> "BinaryProfile":
        text = text.strip()
        if not text or set(text) - {"0", "1"}:
            raise ValueError(f"not a bit string: {text!r}")
        return cls(int(text, 2), len(text))

    @classmethod
    def from_bits(cls, bits: Iterable[int]) -> "BinaryProfile":
        bits = [int(b) for b in bits]
        if any(b not in (0, 1) for b in bits):
            raise ValueError(f"coordinates must be 0 or 1: {bits}")
        value = 0
        for b in bits:
            value = (value << 1) | b
        return cls(value, len(bits))

    @property
    def bits(self) -> tuple[int, ...]:
        return tuple((self.value >> (self.dimension - 1 - j)) & 1 for j in range(self.dimension))

    @property
    def weight(self) -> int:
        return bin(self.value).count("1")

    def leq(self, other: "BinaryProfile") -> bool:
        return leq(self, other)

    def __str__(self) -> str:
        return format(self.value, f"0{self.dimension}b")

    def __repr__(self) -> str:
        return f"BinaryProfile('{self}')"


def as_profile(x, dimension: int | None = None) -> BinaryProfile:
    """Coerce a bit string, bit sequence or profile to :class:`BinaryProfile`."""
    if isinstance(x, BinaryProfile):
        p = x
    elif isinstance(x, str):
        p = BinaryProfile.parse(x)
    elif isinstance(x, (int, np.integer)):
        if dimension is None:
            raise ValueError("an integer profile needs an explicit dimension")
        p = BinaryProfile(int(x), dimension)
    else:
        p = BinaryProfile.from_bits(x)
    if dimension is not None and p.dimension != dimension:
        raise ValueError(f"profile {p} has dimension {p.dimension}, expected {dimension}")
    return p


def leq(x, y) -> bool:
    """Coordinate-wise order: every coordinate of ``x`` is at most that of ``y``."""
    x, y = as_profile(x), as_profile(y)
    if x.dimension != y.dimension:
        raise ValueError(f"dimension mismatch: {x.dimension} vs {y.dimension}")
    return x.value & ~y.value == 0


class Strategy(str, enum.Enum):
    """How a node's single polyforest parent is picked from its cover."""

    RANDOM = "random"
    LINF_NEAREST = "linf"
    L2_NEAREST = "l2"
    PGUIDED = "pguided"


@dataclass(frozen=True)
class HypothesisDag:
    """Tested profiles with the full dominance relation and an optional polyforest.

    ``ancestors[j]`` holds every node ``i`` with an edge ``i -> j``, i.e. every
    tested profile strictly dominating ``nodes[j]``.
    """

    nodes: tuple[BinaryProfile, ...]
    dimension: int
    ancestors: tuple[frozenset, ...]
    parent: tuple[int | None, ...] | None = None
    strategy: Strategy | None = None
    _index: dict = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_index", {p.value: i for i, p in enumerate(self.nodes)})

    def __len__(self) -> int:
        return len(self.nodes)

    def index(self, profile) -> int:
        return self._index[as_profile(profile, self.dimension).value]

    @property
    def values(self) -> np.ndarray:
        return np.array([p.value for p in self.nodes], dtype=np.uint64)

    @property
    def edges(self) -> set[tuple[int, int]]:
        return {(i, j) for j, anc in enumerate(self.ancestors) for i in anc}

    @property
    def has_forest(self) -> bool:
        return self.parent is not None

    @property
    def roots(self) -> list[int]:
        self._require_forest()
        return [i for i, p in enumerate(self.parent) if p is None]

    def children(self) -> list[list[int]]:
        self._require_forest()
        kids: list[list[int]] = [[] for _ in self.nodes]
        for i, p in enumerate(self.parent):
            if p is not None:
                kids[p].append(i)
        return kids

    def with_parents(self, parent: Sequence[int | None] | Mapping[int, int],
                     strategy: Strategy | None = None) -> "HypothesisDag":
        """Attach an explicit polyforest; every parent must strictly dominate its child."""
        if isinstance(parent, Mapping):
            parent = [parent.get(i) for i in range(len(self.nodes))]
        parent = tuple(None if p is None else int(p) for p in parent)
        if len(parent) != len(self.nodes):
            raise ValueError("parent map length differs from node count")
        for i, p in enumerate(parent):
            if p is not None and p not in self.ancestors[i]:
                raise ValueError(f"parent {self.nodes[p]} does not strictly dominate {self.nodes[i]}")
        return replace(self, parent=parent, strategy=strategy)

    def _require_forest(self):
        if self.parent is None:
            raise ValueError("DAG has no polyforest; call derive_polyforest first")


def build_dag(profiles: Iterable, dimension: int | None = None) -> HypothesisDag:
    """Full (transitively closed) dominance DAG over distinct profiles."""
    nodes = tuple(as_profile(p, dimension) for p in profiles)
    if not nodes:
        return HypothesisDag((), dimension or 0, ())
    d = nodes[0].dimension
    if any(p.dimension != d for p in nodes):
        raise ValueError("profiles must share one dimension")
    values = np.array([p.value for p in nodes], dtype=np.uint64)
    if len(np.unique(values)) != len(values):
        dupes = sorted({str(p) for p in nodes if (values == p.value).sum() > 1})
        raise ValueError(f"duplicate profiles: {dupes}")
    ancestors = []
    for v in values:
        dominating = ((values & v) == v) & (values != v)
        ancestors.append(frozenset(np.nonzero(dominating)[0].tolist()))
    return HypothesisDag(nodes, d, tuple(ancestors))


def covers(dag: HypothesisDag) -> list[list[int]]:
    """Immediate dominators of each node within the node set, sorted by index."""
    values = [p.value for p in dag.nodes]
    weight = [p.weight for p in dag.nodes]
    out = []
    for anc in dag.ancestors:
        minimal: list[int] = []
        # a dominator is a cover iff no lighter dominator sits below it
        for j in sorted(anc, key=lambda j: (weight[j], j)):
            vj = values[j]
            if not any(values[k] & ~vj == 0 for k in minimal):
                minimal.append(j)
        out.append(sorted(minimal))
    return out


def derive_polyforest(dag: HypothesisDag, strategy: Strategy | str, seed=None,
                      pvalues=None) -> HypothesisDag:
    """Keep at most one parent per node, chosen from its cover.

    ``pvalues`` (aligned with ``dag.nodes`` or an :class:`EvidenceTable`) is
    required for ``Strategy.PGUIDED``. Ties are broken uniformly at random
    with a generator seeded from ``seed``.
    """
    strategy = Strategy(strategy)
    if strategy is Strategy.PGUIDED:
        if pvalues is None:
            raise ValueError("p-guided parent selection needs screening p-values")
        pv = _aligned_pvalues(dag, pvalues)
    rng = np.random.default_rng(seed)
    parent: list[int | None] = []
    for i, cover in enumerate(covers(dag)):
        if not cover:
            parent.append(None)
            continue
        if strategy is Strategy.RANDOM:
            candidates = cover
        else:
            if strategy is Strategy.PGUIDED:
                score = [pv[j] for j in cover]
            else:
                score = [_distance(dag.nodes[i], dag.nodes[j], strategy) for j in cover]
            lo = min(score)
            candidates = [j for j, s in zip(cover, score) if s == lo]
        if len(candidates) == 1:
            parent.append(candidates[0])
        else:
            parent.append(candidates[int(rng.integers(len(candidates)))])
    return dag.with_parents(parent, strategy)


def _distance(x: BinaryProfile, y: BinaryProfile, strategy: Strategy) -> float:
    diff = bin(x.value ^ y.value).count("1")
    if strategy is Strategy.LINF_NEAREST:
        return float(diff > 0)
    return math.sqrt(diff)


def _aligned_pvalues(dag: HypothesisDag, pvalues) -> list[float]:
    if hasattr(pvalues, "pvalue"):
        try:
            return [pvalues.pvalue(p) for p in dag.nodes]
        except KeyError as exc:
            raise ValueError(f"no p-value for node {exc.args[0]}") from None
    if isinstance(pvalues, Mapping):
        out = []
        for i, p in enumerate(dag.nodes):
            for key in (i, str(p), p):
                if key in pvalues:
                    out.append(float(pvalues[key]))
                    break
            else:
                raise ValueError(f"no p-value for node {p}")
        return out
    pv = [float(x) for x in pvalues]
    if len(pv) != len(dag.nodes):
        raise ValueError(f"expected {len(dag.nodes)} p-values, got {len(pv)}")
    return pv


def leaf_shares(forest: HypothesisDag, active: Iterable[int] | None = None) -> dict[int, Fraction]:
    """Fraction of the forest's leaves lying under each root.

    With ``active`` given, the forest is first restricted to those nodes; a
    node whose parent is inactive becomes a root.
    """
    forest._require_forest()
    alive = set(range(len(forest))) if active is None else set(active)
    if not alive:
        return {}
    has_child = set()
    for i in alive:
        p = forest.parent[i]
        if p is not None and p in alive:
            has_child.add(p)
    leaves = alive - has_child
    counts: dict[int, int] = {}
    for leaf in leaves:
        node = leaf
        while True:
            p = forest.parent[node]
            if p is None or p not in alive:
                break
            node = p
        counts[node] = counts.get(node, 0) + 1
    total = len(leaves)
    return {r: Fraction(c, total) for r, c in sorted(counts.items())}


@dataclass(frozen=True)
class TraceEntry:
    iteration: int
    node: int
    profile: str
    budget: float
    p: float
    cause: str  # "budget-test" | "logical-ancestor"

    def to_dict(self) -> dict:
        return {"iter": self.iteration, "node": self.profile, "budget": self.budget,
                "p": self.p, "cause": self.cause}


@dataclass(frozen=True)
class RejectionSet:
    rejected: frozenset
    trace: tuple[TraceEntry, ...] = ()
    iterations: int = 0

    def __len__(self) -> int:
        return len(self.rejected)

    def __contains__(self, node) -> bool:
        return node in self.rejected

    def profiles(self, dag: HypothesisDag) -> list[BinaryProfile]:
        return sorted((dag.nodes[i] for i in self.rejected), key=lambda p: p.value)

    def trace_jsonl(self) -> str:
        return "".join(json.dumps(e.to_dict()) + "\n" for e in self.trace)


@dataclass(frozen=True)
class Subgroup:
    """Upward-closed set of profiles, stored as its antichain of minimal elements."""

    dimension: int
    minimal_elements: tuple[BinaryProfile, ...] = ()

    def __post_init__(self):
        values = sorted({as_profile(m, self.dimension).value for m in self.minimal_elements})
        antichain = [v for v in values if not any(u != v and u & ~v == 0 for u in values)]
        object.__setattr__(self, "minimal_elements",
                           tuple(BinaryProfile(v, self.dimension) for v in antichain))

    def __contains__(self, x) -> bool:
        return self.membership(x)

    def __bool__(self) -> bool:
        return bool(self.minimal_elements)

    def membership(self, x) -> bool:
        x = as_profile(x, self.dimension)
        return any(m.value & ~x.value == 0 for m in self.minimal_elements)

    def membership_array(self, values) -> np.ndarray:
        """Vectorised membership for integer-encoded profiles."""
        values = np.asarray(values, dtype=np.uint64)
        out = np.zeros(values.shape, dtype=bool)
        for m in self.minimal_elements:
            out |= (values & np.uint64(m.value)) == np.uint64(m.value)
        return out

    def to_dict(self) -> dict:
        return {"dimension": self.dimension,
                "minimal_elements": [str(m) for m in self.minimal_elements]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, obj: Mapping) -> "Subgroup":
        d = int(obj["dimension"])
        return cls(d, tuple(as_profile(m, d) for m in obj["minimal_elements"]))

    @classmethod
    def from_json(cls, text: str) -> "Subgroup":
        return cls.from_dict(json.loads(text))


def upward_closure(rejections: RejectionSet | Iterable[int], dag: HypothesisDag) -> Subgroup:
    """Smallest upward-closed subset of the full lattice containing the rejected profiles."""
    rejected = rejections.rejected if isinstance(rejections, RejectionSet) else rejections
    return Subgroup(dag.dimension or 1, tuple(dag.nodes[i] for i in rejected))
