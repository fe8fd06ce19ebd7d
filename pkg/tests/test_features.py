import datetime as dt

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import zeller_weekday
from ozonecast.dataset import PREDICTORS, TARGET, SplitSpec, TimeSeriesTable, split
from ozonecast.errors import FeatureError
from ozonecast.features import (
    ApproachSpec,
    FeatureSet,
    build_approach,
    design_matrix,
    interaction_features,
    lag_features,
    rank_features,
    temporal_features,
)
from ozonecast.synth import SynthConfig, generate


@pytest.fixture(scope="module")
def table():
    return generate(SynthConfig(n=300, seed=5))


def test_known_weekday():
    assert tuple(temporal_features([dt.date(2015, 1, 1)])[0]) == (2015, 1, 1, 3)


@given(st.dates(dt.date(1900, 1, 1), dt.date(2100, 12, 31)))
def test_weekday_matches_zeller(d):
    assert temporal_features([d])[0, 3] == zeller_weekday(d)


def test_consecutive_weekdays_step_by_one():
    dates = [dt.date(2016, 2, 20) + dt.timedelta(days=i) for i in range(30)]
    dow = temporal_features(dates)[:, 3]
    assert np.all((np.diff(dow) % 7) == 1)


def test_interactions_count_and_names(rng):
    X = rng.normal(size=(5, 11))
    out, names = interaction_features(X, PREDICTORS)
    assert out.shape == (5, 66)
    assert not any(a == b for a, b in (n.split("*") for n in names[11:]))
    np.testing.assert_array_equal(out[:, :11], X)


def test_interaction_value():
    out, names = interaction_features(np.array([[2.0, 3.0]]), ["a", "b"])
    assert names == ["a", "b", "a*b"] and out[0, 2] == 6.0


def test_interaction_needs_two_columns():
    with pytest.raises(FeatureError):
        interaction_features(np.ones((3, 1)), ["a"])


@given(st.integers(0, 1000))
def test_interactions_are_products_of_named_parents(seed):
    r = np.random.default_rng(seed)
    X = r.normal(size=(7, 4))
    out, names = interaction_features(X, ["p", "q", "r", "s"])
    for j, name in enumerate(names[4:], start=4):
        a, b = name.split("*")
        np.testing.assert_array_equal(out[:, j], X[:, "pqrs".index(a)] * X[:, "pqrs".index(b)])


def test_lag_shift():
    cols, names, drop = lag_features([10.0, 20.0, 30.0, 40.0], [1])
    assert names == ["O3_lag_1"] and drop == 1
    np.testing.assert_array_equal(cols[:, 0], [10.0, 20.0, 30.0])


def test_lag_row_count():
    cols, _, drop = lag_features(np.arange(100.0), [1, 3])
    assert cols.shape == (97, 2) and drop == 3


@pytest.mark.parametrize("lags", [[0], [-1], [5], []])
def test_bad_lags(lags):
    with pytest.raises(FeatureError):
        lag_features(np.arange(5.0), lags)


def test_approach_spec_validation():
    with pytest.raises(FeatureError):
        ApproachSpec(5)
    with pytest.raises(FeatureError):
        ApproachSpec(4, lags=())
    with pytest.raises(FeatureError):
        ApproachSpec(4, lags=(0, 1))
    assert ApproachSpec(4).lags == (1, 3)


def test_feature_set_rejects_target_column():
    with pytest.raises(FeatureError):
        FeatureSet((TARGET,), np.zeros((1, 1)), np.zeros(1), (dt.date(2020, 1, 1),))


@pytest.mark.parametrize("approach,p,dropped", [(1, 11, 0), (2, 70, 0), (3, 8, 0), (4, 10, 3)])
def test_approach_widths(table, approach, p, dropped):
    train, test, scaler = build_approach(table, ApproachSpec(approach), seed=1)
    assert len(train.names) == p
    assert train.n_rows + test.n_rows == table.n_rows - dropped
    assert TARGET not in train.names
    assert scaler.columns == train.names


def test_approach3_without_temporal(table):
    train, _, _ = build_approach(table, ApproachSpec(3, temporal_with_selection=False))
    assert len(train.names) == 4


def test_approach2_superset_of_approach1(table):
    a1, _, _ = build_approach(table, ApproachSpec(1))
    a2, _, _ = build_approach(table, ApproachSpec(2))
    assert set(a1.names) <= set(a2.names)
    assert a2.names[:11] == a1.names


def test_rows_stay_date_aligned(table):
    train, test, scaler = build_approach(table, ApproachSpec(4, selected_features=("TMP", "NO")))
    lookup = {d: i for i, d in enumerate(table.dates)}
    for fs in (train, test):
        idx = [lookup[d] for d in fs.row_dates]
        np.testing.assert_array_equal(fs.y, table[TARGET][idx])
        raw = scaler.inverse(fs.X)
        np.testing.assert_allclose(raw[:, fs.names.index("O3_lag_1")], table[TARGET][np.array(idx) - 1])
        np.testing.assert_allclose(raw[:, fs.names.index("TMP")], table["TMP"][idx])


def test_training_columns_standardized(table):
    train, _, _ = build_approach(table, ApproachSpec(2))
    assert np.all(np.abs(train.X.mean(axis=0)) < 1e-9)
    sd = train.X.std(axis=0, ddof=1)
    assert np.all((np.abs(sd - 1) < 1e-9) | (sd == 0))


def test_build_is_deterministic(table):
    a = build_approach(table, ApproachSpec(3), SplitSpec("random", 0.8, 3), seed=9)
    b = build_approach(table, ApproachSpec(3), SplitSpec("random", 0.8, 3), seed=9)
    assert a[0].names == b[0].names
    np.testing.assert_array_equal(a[0].X, b[0].X)
    np.testing.assert_array_equal(a[1].X, b[1].X)


def test_gappy_table_rejected(table):
    o3 = table[TARGET].copy()
    o3[5] = np.nan
    with pytest.raises(FeatureError):
        build_approach(table.with_columns({TARGET: o3}), ApproachSpec(1))
    tmp = table["TMP"].copy()
    tmp[5] = np.nan
    with pytest.raises(FeatureError):
        build_approach(table.with_columns({"TMP": tmp}), ApproachSpec(2))


def test_missing_selection_rejected(table):
    with pytest.raises(FeatureError):
        design_matrix(table, ApproachSpec(3))


@pytest.mark.parametrize("approach", [1, 2, 3, 4])
def test_test_targets_never_read(table, approach):
    """Poisoning every test-row target with NaN leaves every training artifact unchanged."""
    spec = SplitSpec("chronological", 0.8)
    _, test_idx = split(table, spec)
    o3 = table[TARGET].copy()
    o3[test_idx] = np.nan
    poisoned_table = table.with_columns({TARGET: o3})
    clean = build_approach(table, ApproachSpec(approach), spec, seed=2)
    poisoned = build_approach(poisoned_table, ApproachSpec(approach), spec, seed=2)
    assert poisoned[0].names == clean[0].names
    np.testing.assert_array_equal(poisoned[0].X, clean[0].X)
    np.testing.assert_array_equal(poisoned[0].y, clean[0].y)
    np.testing.assert_array_equal(poisoned[2].mean, clean[2].mean)
    np.testing.assert_array_equal(poisoned[2].sd, clean[2].sd)
    assert np.isnan(poisoned[1].y).all()


def _known_signal(seed, n=200):
    r = np.random.default_rng(seed)
    X = r.normal(size=(n, 2))
    y = 3 * X[:, 0] + r.normal(size=n)
    dates = tuple(dt.date(2020, 1, 1) + dt.timedelta(days=i) for i in range(n))
    return FeatureSet(("f1", "f2"), X, y, dates)


def test_rank_features_normalized_and_ordered():
    ranking = rank_features(_known_signal(0), {"n_trees": 30})
    assert abs(sum(v for _, v in ranking) - 1.0) <= 1e-9
    assert ranking[0][0] == "f1"
    values = [v for _, v in ranking]
    assert values == sorted(values, reverse=True)


def test_rank_features_deterministic():
    fs = _known_signal(1)
    assert rank_features(fs, {"n_trees": 10}, seed=4) == rank_features(fs, {"n_trees": 10}, seed=4)
