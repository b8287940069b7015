import csv

import numpy as np
import pytest

from isoturn import Strategy, ThresholdConfig
from isoturn.simulation import (
    RESULT_COLUMNS,
    MonotonicityError,
    RateRow,
    SyntheticModel,
    binomial_interval,
    compare_strategies,
    estimate_fwer,
    generate,
    load_spec,
    shipped_model,
    write_rows_csv,
)


def _constant(d, value):
    return SyntheticModel.planted(d, value)


@pytest.mark.parametrize("value", [0.0, 1.0])
def test_degenerate_outcomes(value):
    data = generate(_constant(3, value), 500, seed=1)
    assert set(data.outcomes.tolist()) == {int(value)}


def test_outcome_means_follow_eta():
    d = 3
    weights = np.array([bin(v).count("1") for v in range(8)])
    model = SyntheticModel(d, 0.1 + 0.2 * weights / 3, np.full(8, 1 / 8))
    data = generate(model, 80_000, seed=2)
    for v in range(8):
        y = data.outcomes[data.profiles == v]
        se = np.sqrt(model.eta[v] * (1 - model.eta[v]) / y.size)
        assert abs(y.mean() - model.eta[v]) < 3 * se


def test_generate_is_seed_deterministic():
    model = SyntheticModel.planted(4, 0.1, {"1100": 0.3})
    assert generate(model, 1000, seed=9) == generate(model, 1000, seed=9)
    assert generate(model, 1000, seed=9) != generate(model, 1000, seed=10)


def test_group_split_controls_labels():
    data = generate(SyntheticModel.planted(2, 0.1, group_split=0.25), 20_000, seed=3)
    assert np.mean(data.groups == "red") == pytest.approx(0.25, abs=0.015)


def test_monotonicity_violation_names_the_cover_pair():
    eta = np.full(8, 0.1)
    eta[0b010] = 0.3
    with pytest.raises(MonotonicityError) as info:
        SyntheticModel(3, eta, np.full(8, 1 / 8))
    assert {str(info.value.lower), str(info.value.upper)} <= {"010", "011", "110"}
    assert str(info.value.lower) == "010"


def test_model_validation():
    with pytest.raises(ValueError):
        SyntheticModel(2, np.full(4, 0.1), np.full(4, 0.3))
    with pytest.raises(ValueError):
        SyntheticModel(2, np.full(3, 0.1), np.full(3, 1 / 3))


def test_fwer_zero_for_degenerate_null():
    for pipeline in ("iss", "turnover"):
        row = estimate_fwer(_constant(3, 0.0), pipeline, replicates=20, n=300)
        assert row.rejections == 0


def test_fwer_zero_at_alpha_zero():
    row = estimate_fwer(_constant(3, 0.15), "iss", replicates=20, n=500, thresholds=ThresholdConfig(alpha=0))
    assert row.rate == 0


def test_fwer_requires_a_null_model():
    with pytest.raises(ValueError, match="not a null model"):
        estimate_fwer(SyntheticModel.planted(3, 0.1, {"100": 0.3}), replicates=1)
    with pytest.raises(ValueError, match="turnover"):
        estimate_fwer(_constant(3, 0.1), "iss", strategy="pguided", replicates=1)


def test_fwer_weakly_increases_with_alpha():
    model = _constant(4, 0.165)
    rates = [estimate_fwer(model, "iss", replicates=60, seed=4, n=400,
                           thresholds=ThresholdConfig(alpha=a)).rejections for a in (0.05, 0.2, 0.5)]
    assert rates == sorted(rates)


def test_fwer_seeds_are_reproducible_with_threads():
    model = _constant(3, 0.12)
    a = estimate_fwer(model, "iss", replicates=16, seed=3, n=300, thresholds=ThresholdConfig(alpha=0.5))
    b = estimate_fwer(model, "iss", replicates=16, seed=3, n=300, thresholds=ThresholdConfig(alpha=0.5), workers=4)
    assert a == b


def test_compare_strategies_zero_replicates():
    model = SyntheticModel.planted(3, 0.1, {"110": 0.4})
    assert compare_strategies(model, [Strategy.RANDOM], replicates=0) == []


def test_forced_forest_gives_equal_power():
    # a single chain: every strategy must pick the same parents
    model = SyntheticModel.planted(3, 0.05, {"011": 0.4})
    chain = ["000", "001", "011", "111"]
    rows = compare_strategies(model, list(Strategy), replicates=8, n=3000, candidates=chain)
    by_node = {}
    for r in rows:
        by_node.setdefault(r.node, set()).add(r.rejections)
    assert by_node and all(len(v) == 1 for v in by_node.values())


def test_binomial_interval():
    assert binomial_interval(0, 0) == (0.0, 1.0)
    lo, hi = binomial_interval(0, 100)
    assert lo == 0.0 and hi == pytest.approx(0.0362, abs=1e-4)
    lo, hi = binomial_interval(50, 100)
    assert lo < 0.5 < hi


def test_csv_output(tmp_path):
    path = tmp_path / "out.csv"
    write_rows_csv([RateRow("random", "any", 3, 100)], path)
    rows = list(csv.DictReader(path.open()))
    assert tuple(rows[0]) == RESULT_COLUMNS
    assert float(rows[0]["rate"]) == 0.03
    write_rows_csv([], path)
    assert path.read_text().strip() == ",".join(RESULT_COLUMNS)


@pytest.mark.parametrize("name", ["null_model", "planted_model", "adversarial_model"])
def test_shipped_models_load(name):
    spec = load_spec(shipped_model(name))
    assert spec.model.exposure.sum() == pytest.approx(1.0)
    assert spec.n > 0
