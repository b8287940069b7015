"""Two-subsample data turnover: screen on one group, validate on the other.

Each direction screens candidates on its screening group (``p <= kappa``),
arranges the survivors into a polyforest (by default steered by the
screening p-values), computes validation p-values for the survivors only and
runs the DAG test at ``alpha / 2``.  The two directions never read each
other's outcomes.
"""
from __future__ import annotations

import enum
import json
import logging
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .dagtest import dag_test
from .data import GROUPS, Dataset
from .evidence import EvidenceTable, ThresholdConfig, evidence_table
from .lattice import (
    BinaryProfile,
    HypothesisDag,
    RejectionSet,
    Strategy,
    Subgroup,
    as_profile,
    build_dag,
    derive_polyforest,
    upward_closure,
)

__all__ = [
    "Directions",
    "TurnoverConfig",
    "DirectionResult",
    "TurnoverReport",
    "all_profiles",
    "split_by_group",
    "screen",
    "screened_polyforest",
    "run_turnover",
]

log = logging.getLogger(__name__)

RED_TO_BLUE = "red_to_blue"
BLUE_TO_RED = "blue_to_red"


class Directions(str, enum.Enum):
    RED_SCREENS_BLUE_VALIDATES = "red_to_blue"
    BLUE_SCREENS_RED_VALIDATES = "blue_to_red"
    BOTH = "both"


@dataclass(frozen=True)
class TurnoverConfig:
    """``external_hypotheses`` replaces blue-side screening for the
    blue-to-red direction (a stand-in for hypotheses produced by exploring
    the blue data). ``blue_source`` defaults to ``"external"`` when they are
    given and ``"screen"`` otherwise; asking for both is an error."""

    thresholds: ThresholdConfig = field(default_factory=ThresholdConfig)
    strategy: Strategy = Strategy.PGUIDED
    seed: int | None = 0
    directions: Directions = Directions.BOTH
    external_hypotheses: tuple | None = None
    blue_source: str | None = None
    ordering: str = "nearest"
    threads: int = 1

    def __post_init__(self):
        object.__setattr__(self, "strategy", Strategy(self.strategy))
        object.__setattr__(self, "directions", Directions(self.directions))
        if self.external_hypotheses is not None:
            object.__setattr__(self, "external_hypotheses",
                               tuple(as_profile(x) for x in self.external_hypotheses))
        source = self.blue_source
        if source is None:
            source = "external" if self.external_hypotheses is not None else "screen"
        if source not in ("screen", "external"):
            raise ValueError(f"blue_source must be 'screen' or 'external', got {source!r}")
        if source == "screen" and self.external_hypotheses is not None:
            raise ValueError("blue-to-red direction cannot both screen and take external hypotheses")
        if source == "external" and self.external_hypotheses is None:
            raise ValueError("blue_source='external' needs external_hypotheses")
        object.__setattr__(self, "blue_source", source)

    @property
    def validation_alpha(self) -> float:
        return self.thresholds.alpha / 2

    def active_directions(self) -> list[str]:
        if self.directions is Directions.BOTH:
            return [RED_TO_BLUE, BLUE_TO_RED]
        return [self.directions.value]

    def to_dict(self) -> dict:
        return {
            **self.thresholds.to_dict(),
            "validation_alpha": self.validation_alpha,
            "strategy": self.strategy.value,
            "seed": self.seed,
            "directions": self.directions.value,
            "blue_source": self.blue_source,
            "external_hypotheses": (None if self.external_hypotheses is None
                                    else [str(x) for x in self.external_hypotheses]),
            "ordering": self.ordering,
        }


def all_profiles(dimension: int) -> list[BinaryProfile]:
    if dimension > 20:
        raise ValueError(f"refusing to enumerate 2^{dimension} profiles")
    return [BinaryProfile(v, dimension) for v in range(1 << dimension)]


def split_by_group(data: Dataset) -> tuple[Dataset, Dataset]:
    """Partition into (red, blue) by group label."""
    if data.groups is None:
        raise ValueError("dataset carries no group labels")
    labels = np.asarray(data.groups, dtype=object)
    bad = ~np.isin(labels, GROUPS)
    if bad.any():
        first = int(np.nonzero(bad)[0][0])
        raise ValueError(f"observation {first} has group {labels[first]!r}; expected one of {GROUPS}")
    return data.subset(labels == "red"), data.subset(labels == "blue")


def screen(data: Dataset, candidates: Iterable, tau: float, kappa: float,
           ordering: str = "nearest", threads: int = 1) -> EvidenceTable:
    """Candidates whose p-value on ``data`` is at most ``kappa``, with those p-values."""
    if not 0 < kappa < 1:
        raise ValueError(f"kappa must lie in (0, 1), got {kappa}")
    table = evidence_table(candidates, data, tau, ordering=ordering, threads=threads)
    keep = [i for i, p in enumerate(table.p) if p <= kappa]
    return EvidenceTable(tuple(table.profiles[i] for i in keep), table.n[keep], table.p[keep], tau)


def screened_polyforest(screened: EvidenceTable, seed=None, strategy: Strategy | str = Strategy.PGUIDED,
                        dimension: int | None = None) -> HypothesisDag:
    """Polyforest over the screened profiles only; covers are taken within that set."""
    dag = build_dag(screened.profiles, dimension)
    return derive_polyforest(dag, strategy, seed, screened if Strategy(strategy) is Strategy.PGUIDED else None)


@dataclass(frozen=True)
class DirectionResult:
    name: str
    screening_group: str
    validation_group: str
    source: str  # "screen" | "external"
    alpha: float
    screened: EvidenceTable
    forest: HypothesisDag
    validation: EvidenceTable
    rejections: RejectionSet
    subgroup: Subgroup

    @property
    def rejected_profiles(self) -> list[BinaryProfile]:
        return self.rejections.profiles(self.forest)

    def parents(self) -> dict[str, str | None]:
        return {str(node): (None if p is None else str(self.forest.nodes[p]))
                for node, p in zip(self.forest.nodes, self.forest.parent)}


@dataclass(frozen=True)
class TurnoverReport:
    dimension: int
    directions: dict
    replicable: tuple[BinaryProfile, ...]
    global_null: tuple[BinaryProfile, ...]
    config: TurnoverConfig

    def to_dict(self, trace_refs: dict | None = None) -> dict:
        dirs = self.directions
        return {
            "screened": {k: {"group": r.screening_group, "source": r.source,
                             "nodes": r.screened.to_list()} for k, r in dirs.items()},
            "validated": {k: {"group": r.validation_group, "alpha": r.alpha,
                              "pvalues": r.validation.to_list(), "parents": r.parents(),
                              "rejected": [str(x) for x in r.rejected_profiles],
                              "iterations": r.rejections.iterations} for k, r in dirs.items()},
            "replicable": [str(x) for x in self.replicable],
            "global_null": [str(x) for x in self.global_null],
            "subgroups": {k: r.subgroup.to_dict() for k, r in dirs.items()},
            "config": {"dimension": self.dimension, **self.config.to_dict()},
            "trace_refs": (dict(trace_refs) if trace_refs is not None
                           else {k: {"entries": len(r.rejections.trace)} for k, r in dirs.items()}),
        }

    def to_json(self, trace_refs: dict | None = None, indent: int | None = 2) -> str:
        return json.dumps(self.to_dict(trace_refs), indent=indent)


def _run_direction(name: str, screen_data: Dataset, validate_data: Dataset,
                   candidates: Sequence[BinaryProfile], config: TurnoverConfig, seed) -> DirectionResult:
    th = config.thresholds
    screening_group, validation_group = name.split("_to_")
    if name == BLUE_TO_RED and config.blue_source == "external":
        nodes = config.external_hypotheses
        # exploration side: its own p-values may steer the forest
        guide = evidence_table(nodes, screen_data, th.tau, ordering=config.ordering)
        screened, source = guide, "external"
    else:
        screened = screen(screen_data, candidates, th.tau, th.kappa, config.ordering, config.threads)
        source = "screen"
    forest = screened_polyforest(screened, seed, config.strategy, screen_data.dimension)
    validation = evidence_table(forest.nodes, validate_data, th.tau, ordering=config.ordering,
                                threads=config.threads)
    rejections = dag_test(forest, validation, config.validation_alpha)
    log.info("%s: %d screened, %d rejected", name, len(forest), len(rejections))
    return DirectionResult(name, screening_group, validation_group, source, config.validation_alpha,
                           screened, forest, validation, rejections, upward_closure(rejections, forest))


def run_turnover(data: Dataset, candidates: Iterable | None = None,
                 config: TurnoverConfig | None = None) -> TurnoverReport:
    """Run the configured directions and combine their findings.

    A profile (from the candidates, external hypotheses or any tested node)
    is replicable when it lies in the upward-closed rejection region of both
    directions, and a global-null finding when it lies in at least one.
    """
    config = config or TurnoverConfig()
    d = data.dimension
    candidates = all_profiles(d) if candidates is None else [as_profile(x, d) for x in candidates]
    red, blue = split_by_group(data)
    groups = {"red": red, "blue": blue}
    results = {}
    for k, name in enumerate(config.active_directions()):
        s, v = name.split("_to_")
        seed = None if config.seed is None else [config.seed, k]
        results[name] = _run_direction(name, groups[s], groups[v], candidates, config, seed)

    universe = {x.value for x in candidates}
    for r in results.values():
        universe.update(x.value for x in r.forest.nodes)
    if config.external_hypotheses:
        universe.update(x.value for x in config.external_hypotheses)
    ordered = [BinaryProfile(v, d) for v in sorted(universe)]
    subgroups = [r.subgroup for r in results.values()]
    hits = [[x in g for g in subgroups] for x in ordered]
    both = len(results) == 2
    replicable = tuple(x for x, h in zip(ordered, hits) if both and all(h))
    global_null = tuple(x for x, h in zip(ordered, hits) if any(h))
    return TurnoverReport(d, results, replicable, global_null, config)
