import json

import numpy as np
import pytest

from isoturn import Dataset, Strategy, ThresholdConfig, TurnoverConfig, run_turnover
from isoturn.turnover import all_profiles, screen, split_by_group

TH = ThresholdConfig()


def _data(seed=0, n=8000, d=4):
    rng = np.random.default_rng(seed)
    x = rng.integers(0, 1 << d, n)
    eta = np.where((x & 0b1100) == 0b1100, 0.45, 0.08)
    y = (rng.random(n) < eta).astype(np.uint8)
    groups = np.where(rng.random(n) < 0.5, "red", "blue")
    return Dataset(x, y, d, groups)


def _flip_group(data, group, seed):
    rng = np.random.default_rng(seed)
    y = data.outcomes.copy()
    mask = data.groups == group
    y[mask] = rng.integers(0, 2, int(mask.sum()))
    return data.with_outcomes(y)


def test_directions_only_read_their_own_groups():
    data = _data()
    base = run_turnover(data, config=TurnoverConfig(TH, seed=3))
    changed_blue = run_turnover(_flip_group(data, "blue", 1), config=TurnoverConfig(TH, seed=3))
    changed_red = run_turnover(_flip_group(data, "red", 2), config=TurnoverConfig(TH, seed=3))

    a, b = base.directions["red_to_blue"], changed_blue.directions["red_to_blue"]
    assert a.screened.to_list() == b.screened.to_list()
    assert a.forest.parent == b.forest.parent
    a, b = base.directions["blue_to_red"], changed_red.directions["blue_to_red"]
    assert a.screened.to_list() == b.screened.to_list()
    assert a.forest.parent == b.forest.parent
    # validation of red_to_blue reads blue only
    a, b = base.directions["red_to_blue"], changed_red.directions["red_to_blue"]
    if a.forest.nodes == b.forest.nodes:
        assert a.validation.to_list() == b.validation.to_list()


def test_signal_is_replicable():
    report = run_turnover(_data(), config=TurnoverConfig(TH, seed=0))
    found = {str(x) for x in report.replicable}
    assert "1100" in found and "1111" in found
    assert not {"0000", "1000", "0100", "0011"} & found
    assert set(report.replicable) <= set(report.global_null)
    for r in report.directions.values():
        assert r.alpha == pytest.approx(0.025)
        assert all(p <= TH.kappa for p in r.screened.p)


def test_report_json_sections():
    report = run_turnover(_data(), config=TurnoverConfig(TH, seed=0))
    doc = json.loads(report.to_json())
    assert set(doc) == {"screened", "validated", "replicable", "global_null", "subgroups", "config", "trace_refs"}
    assert round(doc["config"]["tau"], 3) == 0.172
    assert doc["config"]["validation_alpha"] == pytest.approx(0.025)
    assert set(doc["validated"]) == {"red_to_blue", "blue_to_red"}


def test_external_hypotheses_are_validated_as_given():
    hyps = ("1100", "0011", "1111")
    report = run_turnover(_data(), config=TurnoverConfig(TH, Strategy.PGUIDED, 0, external_hypotheses=hyps))
    r = report.directions["blue_to_red"]
    assert r.source == "external"
    assert sorted(str(x) for x in r.forest.nodes) == sorted(hyps)
    assert sorted(v["profile"] for v in r.validation.to_list()) == sorted(hyps)


def test_screen_and_external_together_is_an_error():
    with pytest.raises(ValueError, match="both"):
        TurnoverConfig(TH, external_hypotheses=("11",), blue_source="screen")
    with pytest.raises(ValueError):
        TurnoverConfig(TH, blue_source="external")


def test_single_direction_has_no_replicable_findings():
    report = run_turnover(_data(), config=TurnoverConfig(TH, directions="red_to_blue"))
    assert list(report.directions) == ["red_to_blue"]
    assert report.replicable == ()
    assert report.global_null


def test_null_data_rejects_nothing():
    rng = np.random.default_rng(1)
    n, d = 4000, 4
    data = Dataset(rng.integers(0, 16, n), (rng.random(n) < 0.05).astype(np.uint8), d,
                   np.where(rng.random(n) < 0.5, "red", "blue"))
    report = run_turnover(data, config=TurnoverConfig(TH, seed=0))
    assert report.global_null == ()


def test_screen_keeps_only_small_pvalues():
    data = _data()
    red, _ = split_by_group(data)
    table = screen(red, all_profiles(4), TH.tau, TH.kappa)
    assert all(p <= TH.kappa for p in table.p)
    with pytest.raises(ValueError):
        screen(red, all_profiles(4), TH.tau, 0.0)


def test_group_labels_are_checked():
    data = Dataset.from_rows([("01", 1, "red"), ("10", 0, "green")])
    with pytest.raises(ValueError, match="green"):
        split_by_group(data)
    with pytest.raises(ValueError):
        split_by_group(Dataset.from_rows([("01", 1)]))


def test_all_profiles_refuses_huge_dimensions():
    assert len(all_profiles(3)) == 8
    with pytest.raises(ValueError):
        all_profiles(21)


def test_turnover_is_seed_deterministic():
    data = _data()
    cfg = TurnoverConfig(TH, Strategy.RANDOM, seed=5)
    assert run_turnover(data, config=cfg).to_json() == run_turnover(data, config=cfg).to_json()
