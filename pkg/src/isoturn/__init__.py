"""Isotonic subgroup selection with anytime-valid p-values and data turnover."""
from .dagtest import ISSResult, dag_test, iss
from .data import Dataset
from .evidence import EvidenceTable, ThresholdConfig, anytime_valid_pvalue, evidence_table, odds_threshold
from .lattice import (
    BinaryProfile,
    HypothesisDag,
    RejectionSet,
    Strategy,
    Subgroup,
    build_dag,
    covers,
    derive_polyforest,
    leaf_shares,
    leq,
    upward_closure,
)
from .special import incomplete_beta
from .turnover import TurnoverConfig, TurnoverReport, run_turnover

__version__ = "0.1.0"

__all__ = [
    "BinaryProfile",
    "Dataset",
    "EvidenceTable",
    "HypothesisDag",
    "ISSResult",
    "RejectionSet",
    "Strategy",
    "Subgroup",
    "ThresholdConfig",
    "TurnoverConfig",
    "TurnoverReport",
    "anytime_valid_pvalue",
    "build_dag",
    "covers",
    "dag_test",
    "derive_polyforest",
    "evidence_table",
    "incomplete_beta",
    "iss",
    "leaf_shares",
    "leq",
    "odds_threshold",
    "run_turnover",
    "upward_closure",
]
