import json
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from structcox.survival import (DataError, SimulationConfig, SurvivalDataset, TrueModel,
                                build_risk_sets, load_dataset, replicate_seed, save_dataset,
                                simulate_cox_sample, summarize_dataset, weibull_hazard)


def test_csv_round_trip_summary(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("time,status,x1\n3,1,0.5\n1,0,0.2\n2,1,0.9\n")
    ds = load_dataset(path)
    s = summarize_dataset(ds)
    assert s["n"] == 3 and s["N"] == 2
    assert np.allclose(ds.failure_times, [2, 3])
    assert s["censoring_rate"] == pytest.approx(1 / 3)


def test_risk_sets_hand_example():
    ds = SurvivalDataset.from_arrays([3, 1, 2], [1, 0, 1], [[0.1], [0.2], [0.3]])
    # 0-based: times 2 and 3 -> subjects {0, 2} then {0}
    assert [r.tolist() for r in ds.risk_sets] == [[0, 2], [0]]


def test_tied_event_times_collapse():
    ds = SurvivalDataset.from_arrays([2, 2], [1, 1], [[0.1], [0.2]])
    assert ds.N == 1 and ds.tie_flag and ds.event_counts.tolist() == [2]


def test_build_risk_sets_matches_dataset():
    rng = np.random.default_rng(0)
    t = rng.exponential(size=15)
    s = rng.integers(0, 2, 15)
    s[0] = 1
    ft, sets, counts, _ = build_risk_sets(t, s)
    ds = SurvivalDataset.from_arrays(t, s, rng.uniform(size=(15, 1)))
    assert np.allclose(ft, ds.failure_times)
    assert all(np.array_equal(a, b) for a, b in zip(sets, ds.risk_sets))
    assert np.array_equal(counts, ds.event_counts)


@pytest.mark.parametrize("text, fragment", [
    ("time,status,x1\n1,2,0.5\n", "status"),
    ("time,status,x1\n-1,1,0.5\n", "time"),
    ("time,status,x1\n1,1,1.5\n", "outside"),
    ("time,status\n1,1\n", "x1"),
    ("time,status,x1\n", "no records"),
])
def test_bad_files_are_rejected(tmp_path, text, fragment):
    path = tmp_path / "bad.csv"
    path.write_text(text)
    with pytest.raises(DataError, match=fragment):
        load_dataset(path)


def test_no_events_warns():
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        ds = SurvivalDataset.from_arrays([1, 2], [0, 0], [[0.1], [0.2]])
    assert ds.N == 0 and any("no observed events" in str(x.message) for x in w)


def test_save_and_load_keep_values(tmp_path):
    rng = np.random.default_rng(1)
    ds = SurvivalDataset.from_arrays(rng.exponential(size=8), [1, 0] * 4, rng.uniform(size=(8, 2)), tau=5.0)
    save_dataset(ds, tmp_path / "d.csv", comments={"seed": 1})
    back = load_dataset(tmp_path / "d.csv")
    assert np.array_equal(back.time, ds.time) and np.array_equal(back.covariates, ds.covariates)
    assert back.tau == 5.0
    assert json.loads((tmp_path / "d.json").read_text())["N"] == ds.N


def test_exponential_times_without_censoring():
    ds = simulate_cox_sample(SimulationConfig(n=20000, p=1, seed=3))
    assert ds.n_events == ds.n
    assert ds.time.mean() == pytest.approx(1.0, abs=0.02)
    assert stats.kstest(ds.time, "expon").statistic < 0.01


def test_weibull_inverse_transform():
    model = TrueModel(baseline=weibull_hazard(2.0, 1.5))
    ds = simulate_cox_sample(SimulationConfig(n=20000, p=1, seed=4, true_model=model))
    assert stats.kstest(ds.time, "weibull_min", args=(2.0, 0, 1.5)).statistic < 0.015


def test_simulation_is_seed_deterministic():
    a = simulate_cox_sample(SimulationConfig(n=50, p=3, seed=9))
    b = simulate_cox_sample(SimulationConfig(n=50, p=3, seed=9))
    assert np.array_equal(a.time, b.time) and np.array_equal(a.covariates, b.covariates)


def test_administrative_censoring_at_tau():
    ds = simulate_cox_sample(SimulationConfig(n=500, p=1, seed=2, tau=0.5))
    assert ds.time.max() <= 0.5
    assert np.all(ds.status[ds.time == 0.5] == 0)


def test_replicate_seed_streams_differ():
    assert replicate_seed(5, 0) != replicate_seed(5, 1)


@given(st.lists(st.tuples(st.floats(0.01, 10), st.integers(0, 1)), min_size=1, max_size=30))
def test_risk_sets_are_nested_and_contain_their_failures(rows):
    t = np.array([r[0] for r in rows])
    s = np.array([r[1] for r in rows])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        ds = SurvivalDataset.from_arrays(t, s, np.full((len(rows), 1), 0.5))
    sets = ds.risk_sets
    for q, (tq, R) in enumerate(zip(ds.failure_times, sets)):
        assert np.all(t[R] >= tq)
        assert set(np.flatnonzero((t == tq) & (s == 1))) <= set(R.tolist())
        if q:
            assert set(R.tolist()) <= set(sets[q - 1].tolist())
    assert ds.event_counts.sum() == s[t <= ds.tau].sum()
