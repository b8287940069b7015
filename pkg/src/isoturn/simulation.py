"""Synthetic monotone models, Monte-Carlo FWER and power estimation."""
from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np
from scipy import stats

from .dagtest import iss
from .data import Dataset
from .evidence import ThresholdConfig
from .lattice import BinaryProfile, Strategy, as_profile
from .turnover import TurnoverConfig, all_profiles, run_turnover

__all__ = [
    "MonotonicityError",
    "SyntheticModel",
    "SimulationSpec",
    "generate",
    "binomial_interval",
    "RateRow",
    "estimate_fwer",
    "compare_strategies",
    "replicate_seeds",
    "write_rows_csv",
    "load_spec",
    "RESULT_COLUMNS",
    "shipped_model",
]

PIPELINES = ("iss", "turnover")
RESULT_COLUMNS = ("strategy", "node", "rejections", "replicates", "rate", "ci_low", "ci_high")


class MonotonicityError(ValueError):
    """Regression function decreases along a cover pair of the lattice."""

    def __init__(self, lower: BinaryProfile, upper: BinaryProfile, eta_lower: float, eta_upper: float):
        self.lower, self.upper = lower, upper
        super().__init__(f"eta is not monotone: eta({lower})={eta_lower:g} > eta({upper})={eta_upper:g}")


@dataclass(frozen=True, eq=False)
class SyntheticModel:
    """Regression function ``eta`` and exposure distribution over ``{0,1}^d``,
    both as arrays indexed by the integer encoding of a profile."""

    dimension: int
    eta: np.ndarray
    exposure: np.ndarray
    group_split: float = 0.5  # fraction labelled red

    def __post_init__(self):
        size = 1 << self.dimension
        eta = np.asarray(self.eta, dtype=float)
        exposure = np.asarray(self.exposure, dtype=float)
        if eta.shape != (size,) or exposure.shape != (size,):
            raise ValueError(f"eta and exposure need {size} entries")
        if np.any((eta < 0) | (eta > 1)):
            raise ValueError("eta values must be probabilities")
        if np.any(exposure < 0) or not math.isclose(exposure.sum(), 1.0, rel_tol=1e-9):
            raise ValueError("exposure must be a probability distribution")
        if not 0 <= self.group_split <= 1:
            raise ValueError("group_split must lie in [0, 1]")
        object.__setattr__(self, "eta", eta)
        object.__setattr__(self, "exposure", exposure / exposure.sum())
        self.check_monotone()

    def check_monotone(self):
        d = self.dimension
        for v in range(1 << d):
            for j in range(d):
                bit = 1 << j
                if not v & bit and self.eta[v] > self.eta[v | bit]:
                    raise MonotonicityError(BinaryProfile(v, d), BinaryProfile(v | bit, d),
                                            self.eta[v], self.eta[v | bit])

    @staticmethod
    def product_exposure(dimension: int, prevalence) -> np.ndarray:
        """Independent coordinates; ``prevalence[0]`` is coordinate 1."""
        rates = np.broadcast_to(np.asarray(prevalence, dtype=float), (dimension,))
        values = np.arange(1 << dimension)
        probs = np.ones(values.size)
        for j, r in enumerate(rates):
            on = (values >> (dimension - 1 - j)) & 1
            probs *= np.where(on == 1, r, 1 - r)
        return probs

    @classmethod
    def planted(cls, dimension: int, baseline: float, signals: Mapping | None = None,
                prevalence=0.5, exposure=None, group_split: float = 0.5) -> "SyntheticModel":
        """``eta = baseline`` except ``eta(x) = value`` for every ``x`` above a
        planted minimal profile (the largest value wins where they overlap)."""
        eta = np.full(1 << dimension, float(baseline))
        values = np.arange(1 << dimension)
        for prof, level in (signals or {}).items():
            m = as_profile(prof, dimension).value
            above = (values & m) == m
            eta[above] = np.maximum(eta[above], level)
        if exposure is None:
            exposure = cls.product_exposure(dimension, prevalence)
        return cls(dimension, eta, exposure, group_split)

    def eta_of(self, profile) -> float:
        return float(self.eta[as_profile(profile, self.dimension).value])

    def signal_profiles(self, tau: float, candidates: Iterable | None = None) -> list[BinaryProfile]:
        pool = all_profiles(self.dimension) if candidates is None else [as_profile(c, self.dimension)
                                                                         for c in candidates]
        return [x for x in pool if self.eta[x.value] >= tau]

    @classmethod
    def from_dict(cls, obj: Mapping) -> "SyntheticModel":
        d = int(obj["dimension"])
        eta_spec = obj.get("eta", {})
        exp_spec = obj.get("exposure", {"prevalence": 0.5})
        if "distribution" in exp_spec:
            exposure = np.zeros(1 << d)
            for k, v in exp_spec["distribution"].items():
                exposure[as_profile(k, d).value] = float(v)
        else:
            exposure = cls.product_exposure(d, exp_spec.get("prevalence", 0.5))
        split = float(obj.get("group_split", 0.5))
        baseline = float(eta_spec.get("baseline", 0.094))
        if "table" in eta_spec:
            eta = np.full(1 << d, baseline)
            for k, v in eta_spec["table"].items():
                eta[as_profile(k, d).value] = float(v)
            return cls(d, eta, exposure, split)
        return cls.planted(d, baseline, eta_spec.get("planted"), exposure=exposure, group_split=split)


def generate(model: SyntheticModel, n: int, seed=None) -> Dataset:
    """``n`` i.i.d. draws: profile from the exposure law, outcome
    Bernoulli(eta(profile)), red with probability ``group_split``."""
    rng = np.random.default_rng(seed)
    profiles = rng.choice(model.exposure.size, size=n, p=model.exposure).astype(np.uint32)
    outcomes = (rng.random(n) < model.eta[profiles]).astype(np.uint8)
    groups = np.where(rng.random(n) < model.group_split, "red", "blue").astype(object)
    return Dataset(profiles, outcomes, model.dimension, groups)


def binomial_interval(successes: int, trials: int, level: float = 0.95) -> tuple[float, float]:
    """Clopper-Pearson interval; (0, 1) when there are no trials."""
    if trials == 0:
        return 0.0, 1.0
    tail = (1 - level) / 2
    lo = 0.0 if successes == 0 else float(stats.beta.ppf(tail, successes, trials - successes + 1))
    hi = 1.0 if successes == trials else float(stats.beta.ppf(1 - tail, successes + 1, trials - successes))
    return lo, hi


@dataclass(frozen=True)
class RateRow:
    strategy: str
    node: str
    rejections: int
    replicates: int

    @property
    def rate(self) -> float:
        return self.rejections / self.replicates if self.replicates else 0.0

    @property
    def ci(self) -> tuple[float, float]:
        return binomial_interval(self.rejections, self.replicates)

    def as_row(self) -> dict:
        lo, hi = self.ci
        return {"strategy": self.strategy, "node": self.node, "rejections": self.rejections,
                "replicates": self.replicates, "rate": self.rate, "ci_low": lo, "ci_high": hi}


def replicate_seeds(seed, replicates: int) -> list[np.random.SeedSequence]:
    return np.random.SeedSequence(seed).spawn(replicates)


def _map(fn: Callable, items: Sequence, workers: int) -> list:
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def _forest_seed(ss: np.random.SeedSequence) -> int:
    return int(ss.generate_state(1)[0])


def _any_rejection(model, n, pipeline, thresholds, strategy, candidates, ss) -> bool:
    data = generate(model, n, ss)
    if pipeline == "iss":
        result = iss(data, candidates, thresholds.tau, thresholds.alpha, strategy, _forest_seed(ss))
        return len(result.rejections) > 0
    cfg = TurnoverConfig(thresholds, strategy, _forest_seed(ss))
    return len(run_turnover(data, candidates, cfg).global_null) > 0


def estimate_fwer(model: SyntheticModel, pipeline: str = "iss", replicates: int = 2000, seed=0,
                  n: int = 2000, thresholds: ThresholdConfig | None = None,
                  strategy: Strategy | str | None = None, candidates: Iterable | None = None,
                  workers: int = 1) -> RateRow:
    """Fraction of replicates with any rejection under a model whose ``eta``
    stays below ``tau`` everywhere (so every rejection is false)."""
    thresholds = thresholds or ThresholdConfig()
    if pipeline not in PIPELINES:
        raise ValueError(f"pipeline must be one of {PIPELINES}")
    if model.eta.max() >= thresholds.tau:
        raise ValueError(f"max eta {model.eta.max():g} >= tau {thresholds.tau:g}: not a null model")
    strategy = Strategy(strategy or (Strategy.RANDOM if pipeline == "iss" else Strategy.PGUIDED))
    if pipeline == "iss" and strategy is Strategy.PGUIDED:
        raise ValueError("p-guided parents need an independent screening sample; use the turnover pipeline")
    candidates = all_profiles(model.dimension) if candidates is None else list(candidates)
    seeds = replicate_seeds(seed, replicates)
    hits = _map(lambda ss: _any_rejection(model, n, pipeline, thresholds, strategy, candidates, ss),
                seeds, workers)
    return RateRow(strategy.value, "any", int(sum(hits)), replicates)


def compare_strategies(model: SyntheticModel, strategies: Sequence, replicates: int = 500, seed=0,
                       n: int = 20000, thresholds: ThresholdConfig | None = None,
                       candidates: Iterable | None = None, signal_nodes: Iterable | None = None,
                       workers: int = 1) -> list[RateRow]:
    """How often each true-signal node is found replicable by the turnover
    pipeline under each parent-selection strategy.

    All strategies see the same simulated datasets and forest seeds in each
    replicate (common random numbers).
    """
    thresholds = thresholds or ThresholdConfig()
    strategies = [Strategy(s) for s in strategies]
    candidates = all_profiles(model.dimension) if candidates is None else [
        as_profile(c, model.dimension) for c in candidates]
    signals = (model.signal_profiles(thresholds.tau, candidates) if signal_nodes is None
               else [as_profile(s, model.dimension) for s in signal_nodes])
    if replicates == 0 or not strategies:
        return []

    def one(ss):
        data = generate(model, n, ss)
        fseed = _forest_seed(ss)
        found = {}
        for s in strategies:
            report = run_turnover(data, candidates, TurnoverConfig(thresholds, s, fseed))
            rep = {x.value for x in report.replicable}
            found[s] = [x.value in rep for x in signals]
        return found

    outcomes = _map(one, replicate_seeds(seed, replicates), workers)
    rows = []
    for s in strategies:
        for j, node in enumerate(signals):
            rows.append(RateRow(s.value, str(node), sum(o[s][j] for o in outcomes), replicates))
    return rows


def write_rows_csv(rows: Iterable[RateRow], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=RESULT_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow(row.as_row())


@dataclass(frozen=True)
class SimulationSpec:
    """A model file: the model plus the run settings stored next to it."""

    model: SyntheticModel
    n: int = 2000
    thresholds: ThresholdConfig = field(default_factory=ThresholdConfig)
    pipeline: str = "iss"
    strategies: tuple = ()
    candidates: tuple | None = None

    def with_overrides(self, **kw) -> "SimulationSpec":
        return replace(self, **{k: v for k, v in kw.items() if v is not None})


def load_spec(path) -> SimulationSpec:
    obj = json.loads(Path(path).read_text())
    model = SyntheticModel.from_dict(obj)
    th = ThresholdConfig(**obj.get("thresholds", {}))
    cands = obj.get("candidates")
    return SimulationSpec(
        model=model,
        n=int(obj.get("n", 2000)),
        thresholds=th,
        pipeline=obj.get("pipeline", "iss"),
        strategies=tuple(Strategy(s) for s in obj.get("strategies", [])),
        candidates=None if cands is None else tuple(as_profile(c, model.dimension) for c in cands),
    )


def shipped_model(name: str) -> Path:
    """Path of a model file bundled with the package (e.g. ``"null_model"``)."""
    from importlib.resources import files

    path = Path(str(files("isoturn") / "models" / f"{name.removesuffix('.json')}.json"))
    if not path.exists():
        raise FileNotFoundError(f"no shipped model named {name!r}")
    return path
