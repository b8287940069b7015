"""Iterative FWER-controlling testing on a polyforest, and the ISS routine.

Each iteration splits ``alpha`` over the current roots in proportion to the
leaves under them, rejects every root whose p-value fits its budget, rejects
every tested profile dominating a rejected one, and prunes all rejected
nodes so their children become roots.  Budgets are compared exactly
(rationals), so a p-value equal to its budget is rejected.
"""
from __future__ import annotations

import logging
from fractions import Fraction
from typing import Iterable, NamedTuple, Sequence

from .data import Dataset
from .evidence import EvidenceTable, evidence_table
from .lattice import (
    HypothesisDag,
    RejectionSet,
    Strategy,
    Subgroup,
    TraceEntry,
    _aligned_pvalues,
    build_dag,
    derive_polyforest,
    leaf_shares,
    upward_closure,
)

__all__ = ["ISSResult", "dag_test", "iss"]

log = logging.getLogger(__name__)

BUDGET_TEST = "budget-test"
LOGICAL_ANCESTOR = "logical-ancestor"


def dag_test(dag: HypothesisDag, pvalues: EvidenceTable | Sequence[float], alpha: float) -> RejectionSet:
    """Run the budget-passing loop until a full pass rejects nothing.

    ``pvalues`` is an :class:`EvidenceTable` covering every node, or a
    sequence aligned with ``dag.nodes``.  Trace entries record each rejection
    with the node's budget in that iteration (0 for a logical ancestor that
    was not a root at the time).
    """
    if not 0 <= alpha < 1:
        raise ValueError(f"alpha must lie in [0, 1), got {alpha}")
    dag._require_forest()
    pv = _aligned_pvalues(dag, pvalues)
    if not dag.nodes or alpha == 0:
        return RejectionSet(frozenset(), (), 1)

    alpha_q = Fraction(alpha)
    exact_p = [Fraction(p) for p in pv]
    active = set(range(len(dag)))
    rejected: set[int] = set()
    trace: list[TraceEntry] = []
    iteration = 0
    while active:
        iteration += 1
        shares = leaf_shares(dag, active)
        budget = {r: alpha_q * s for r, s in shares.items()}
        hits = sorted(r for r, b in budget.items() if exact_p[r] <= b)
        if not hits:
            break
        for r in hits:
            trace.append(_entry(dag, iteration, r, float(budget[r]), pv[r], BUDGET_TEST))
        newly = set(hits)
        implied = set()
        for r in hits:
            implied |= dag.ancestors[r]
        implied -= rejected | newly
        for a in sorted(implied):
            trace.append(_entry(dag, iteration, a, float(budget.get(a, 0)), pv[a], LOGICAL_ANCESTOR))
        newly |= implied
        rejected |= newly
        active -= newly
        log.debug("iteration %d rejected %d node(s)", iteration, len(newly))
    return RejectionSet(frozenset(rejected), tuple(trace), iteration)


def _entry(dag, iteration, node, budget, p, cause):
    return TraceEntry(iteration, node, str(dag.nodes[node]), budget, float(p), cause)


class ISSResult(NamedTuple):
    rejections: RejectionSet
    subgroup: Subgroup
    dag: HypothesisDag
    pvalues: EvidenceTable


def iss(data: Dataset, candidates: Iterable, tau: float, alpha: float,
        strategy: Strategy | str = Strategy.RANDOM, seed=None,
        screening_pvalues: EvidenceTable | None = None, ordering: str = "nearest",
        threads: int = 1, kernel: str | None = None) -> ISSResult:
    """Isotonic subgroup selection on one sample.

    Returns the node-level rejections, the upward-closed subgroup estimate,
    the tested DAG (with its polyforest) the rejections index into, and the
    p-values.
    ``screening_pvalues`` must come from independent data and is only used by
    the p-guided strategy.
    """
    dag = build_dag(candidates, data.dimension)
    table = evidence_table(dag.nodes, data, tau, ordering=ordering, threads=threads, kernel=kernel)
    forest = derive_polyforest(dag, strategy, seed, screening_pvalues)
    rejections = dag_test(forest, table, alpha)
    return ISSResult(rejections, upward_closure(rejections, forest), forest, table)
