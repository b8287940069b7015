"""Anytime-valid p-values for ``H0: eta(x) < tau`` with Bernoulli outcomes.

For a centre ``x`` the neighbours are the observations ``X_j <= x``.  Walking
them in a fixed, outcome-independent order with running success count
``S_k``, each prefix gives

    tau^S_k (1 - tau)^(k - S_k + 1) / B(1 - tau; k - S_k + 1, S_k + 1)

(``B`` the non-regularized lower incomplete Beta function), and the p-value
is the minimum over prefixes, capped at one.  The reciprocal of each term is
a test martingale (a uniform mixture over alternatives in ``[tau, 1]``), so
the minimum stays valid under optional stopping.
"""
from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from . import _backend
from .data import Dataset
from .lattice import BinaryProfile, as_profile

__all__ = [
    "ORDERINGS",
    "ThresholdConfig",
    "odds_threshold",
    "NeighborSequence",
    "neighbor_order",
    "neighbor_sequence",
    "log_terms",
    "pvalue_from_outcomes",
    "anytime_valid_pvalue",
    "EvidenceTable",
    "evidence_table",
]

ORDERINGS = ("nearest", "index")


def odds_threshold(c: float, p0: float) -> float:
    """Probability whose odds are ``c`` times the odds of ``p0``."""
    if not c > 0:
        raise ValueError(f"odds multiplier must be positive, got {c}")
    if not 0 < p0 < 1:
        raise ValueError(f"baseline probability must lie in (0, 1), got {p0}")
    return c * p0 / (1 + (c - 1) * p0)


@dataclass(frozen=True)
class ThresholdConfig:
    c: float = 2.0
    p0: float = 0.094
    alpha: float = 0.05
    kappa: float = 0.025
    tau: float | None = None

    def __post_init__(self):
        if self.tau is None:
            object.__setattr__(self, "tau", odds_threshold(self.c, self.p0))
        _check_unit("tau", self.tau)
        if not 0 <= self.alpha < 1:
            raise ValueError(f"alpha must lie in [0, 1), got {self.alpha}")
        _check_unit("kappa", self.kappa)

    def to_dict(self) -> dict:
        return {"c": self.c, "p0": self.p0, "tau": self.tau, "alpha": self.alpha,
                "kappa": self.kappa}


def _check_unit(name, value):
    if not 0 < value < 1:
        raise ValueError(f"{name} must lie in (0, 1), got {value}")


@dataclass(frozen=True)
class NeighborSequence:
    center: BinaryProfile
    ordered_indices: np.ndarray
    partial_sums: np.ndarray  # S_1..S_n


def neighbor_order(data: Dataset, ordering: str = "nearest") -> np.ndarray:
    """Permutation of all observations used for every centre.

    ``"nearest"``: by decreasing number of set coordinates, then index; for
    the neighbours of any centre this is increasing Hamming distance.
    ``"index"``: observation order.
    """
    if ordering == "index":
        return np.arange(len(data))
    if ordering != "nearest":
        raise ValueError(f"ordering must be one of {ORDERINGS}, got {ordering!r}")
    weight = _popcount(data.profiles)
    return np.argsort(-weight, kind="stable")


def _popcount(values: np.ndarray) -> np.ndarray:
    v = values.astype(np.uint32)
    return np.unpackbits(v.view(np.uint8).reshape(-1, 4), axis=1).sum(axis=1).astype(np.int64)


def neighbor_sequence(center, data: Dataset, ordering: str = "nearest") -> NeighborSequence:
    center = as_profile(center, data.dimension)
    order = neighbor_order(data, ordering)
    inside = (data.profiles[order] & np.uint32(~center.value & 0xFFFFFFFF)) == 0
    idx = order[inside]
    return NeighborSequence(center, idx, np.cumsum(data.outcomes[idx], dtype=np.int64))


def log_terms(k, s, tau: float, kernel: str | None = None) -> np.ndarray:
    """Log of each prefix term for success counts ``s`` out of ``k``."""
    _check_unit("tau", tau)
    k = np.ascontiguousarray(k, dtype=np.int64)
    s = np.ascontiguousarray(s, dtype=np.int64)
    return _backend.get_kernel(kernel).log_terms(k, s, float(tau))


def _to_pvalue(min_log_term: float) -> float:
    if math.isnan(min_log_term):
        raise FloatingPointError("incomplete Beta evaluation failed to converge")
    return 1.0 if min_log_term >= 0.0 else math.exp(min_log_term)


def pvalue_from_outcomes(outcomes: Sequence[int], tau: float, kernel: str | None = None) -> float:
    """p-value of an already ordered outcome sequence (1 for an empty one)."""
    y = np.asarray(outcomes, dtype=np.int64)
    if y.size == 0:
        _check_unit("tau", tau)
        return 1.0
    lt = log_terms(np.arange(1, y.size + 1), np.cumsum(y), tau, kernel)
    return _to_pvalue(float(lt.min()))


def anytime_valid_pvalue(center, data: Dataset, tau: float, ordering: str = "nearest",
                         kernel: str | None = None) -> float:
    table = evidence_table([center], data, tau, ordering=ordering, kernel=kernel)
    return float(table.p[0])


@dataclass(frozen=True)
class EvidenceTable:
    """p-value and neighbour count per tested profile."""

    profiles: tuple[BinaryProfile, ...]
    n: np.ndarray
    p: np.ndarray
    tau: float

    def __post_init__(self):
        object.__setattr__(self, "_lookup", {str(x): i for i, x in enumerate(self.profiles)})

    def __len__(self) -> int:
        return len(self.profiles)

    def __contains__(self, profile) -> bool:
        return str(as_profile(profile)) in self._lookup

    def pvalue(self, profile) -> float:
        return float(self.p[self._lookup[str(as_profile(profile))]])

    def as_dict(self) -> dict[str, float]:
        return {str(prof): float(p) for prof, p in zip(self.profiles, self.p)}

    def to_list(self) -> list[dict]:
        return [{"profile": str(prof), "n": int(n), "p": float(p)}
                for prof, n, p in zip(self.profiles, self.n, self.p)]

    def to_json(self) -> str:
        return json.dumps(self.to_list())

    @classmethod
    def from_list(cls, rows: Iterable[dict], tau: float) -> "EvidenceTable":
        rows = list(rows)
        return cls(tuple(as_profile(r["profile"]) for r in rows),
                   np.array([int(r["n"]) for r in rows], dtype=np.int64),
                   np.array([float(r["p"]) for r in rows]), tau)


def evidence_table(nodes: Iterable, data: Dataset, tau: float, ordering: str = "nearest",
                   threads: int = 1, kernel: str | None = None) -> EvidenceTable:
    """Anytime-valid p-value for every node against one sample.

    Nodes are independent; with ``threads > 1`` they are split into chunks
    evaluated concurrently (the compiled kernel releases the GIL) and merged
    back in node order.
    """
    _check_unit("tau", tau)
    nodes = tuple(as_profile(x, data.dimension) for x in nodes)
    if not nodes:
        return EvidenceTable((), np.zeros(0, np.int64), np.zeros(0), tau)
    order = neighbor_order(data, ordering)
    profiles = np.ascontiguousarray(data.profiles[order])
    outcomes = np.ascontiguousarray(data.outcomes[order])
    centers = np.array([x.value for x in nodes], dtype=np.uint32)
    sweep = _backend.get_kernel(kernel).sweep

    if threads > 1 and len(centers) > 1:
        chunks = np.array_split(centers, min(threads, len(centers)))
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda c: sweep(profiles, outcomes, np.ascontiguousarray(c), tau),
                                  chunks))
        counts = np.concatenate([c for c, _ in parts])
        best = np.concatenate([b for _, b in parts])
    else:
        counts, best = sweep(profiles, outcomes, centers, float(tau))
    p = np.array([_to_pvalue(float(b)) for b in best])
    return EvidenceTable(nodes, np.asarray(counts, dtype=np.int64), p, tau)
