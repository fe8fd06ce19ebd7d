import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from ozonecast.dataset import SplitSpec
from ozonecast.errors import FitError, MetricError
from ozonecast.evaluate import (
    ROSTER,
    ROSTER_ORDER,
    ModelSpec,
    build_roster,
    export_scatter,
    fit_stacking,
    kfold_assignment,
    model_seed,
    mse,
    parse_value,
    r2,
    run_benchmark,
)
from ozonecast.features import ApproachSpec
from ozonecast.linear import fit_ols
from ozonecast.plot import read_scatter_csv, write_scatter_csv
from ozonecast.synth import SynthConfig, generate

FAST = {
    "rf": {"n_trees": 10},
    "gb": {"n_rounds": 20},
    "gb2": {"n_rounds": 20},
    "hgb": {"n_rounds": 20},
    "stacking": {"bases": "ols,knn", "k": 3},
    "mlp_tanh": {"epochs": 3, "hidden": 8},
    "mlp_relu": {"epochs": 3, "hidden": 8},
}


@pytest.fixture(scope="module")
def table():
    return generate(SynthConfig(n=240, seed=1))


class _Constant:
    def __init__(self, value):
        self.value = value

    def predict(self, X):
        return np.full(np.asarray(X).shape[0], self.value)


def _mean_fit(X, y, seed):
    return _Constant(float(np.mean(y)))


def _nan_fit(X, y, seed):
    return _Constant(float("nan"))


def _raising_fit(X, y, seed):
    raise FitError("deliberate")


def test_metric_examples():
    assert mse([1, 2, 3], [1, 2, 5]) == pytest.approx(4 / 3)
    assert r2([1, 2, 3], [1, 2, 3]) == 1.0
    assert r2([1, 2, 3], [2, 2, 2]) == 0.0
    assert r2([1, 2, 3], [3, 2, 1]) == pytest.approx(-3.0)


@given(arrays(float, st.integers(2, 40), elements=st.floats(-1e3, 1e3)),
       st.integers(0, 2**31 - 1))
def test_r2_identity(a, seed):
    if np.var(a) < 1e-6:
        return
    p = a + np.random.default_rng(seed).normal(size=a.size)
    assert r2(a, p) == pytest.approx(1 - mse(a, p) / np.var(a), rel=1e-9, abs=1e-9)


@pytest.mark.parametrize("a, p", [([1, 2], [1]), ([], []), ([1, np.nan], [1, 2]), ([1, 2], [1, np.inf])])
def test_metric_rejects_bad_input(a, p):
    with pytest.raises(MetricError):
        mse(a, p)


def test_r2_zero_variance():
    with pytest.raises(MetricError):
        r2([2, 2, 2], [1, 2, 3])


def test_roster_order_and_labels():
    assert ROSTER_ORDER == ("ols", "rf", "gb", "svr", "knn", "enet", "gb2", "hgb",
                            "bagging", "stacking", "mlp_tanh", "mlp_relu")
    assert len({s.label for s in ROSTER.values()}) == 12


def test_build_roster_reorders_and_validates():
    assert [s.key for s in build_roster(["knn", "ols"])] == ["ols", "knn"]
    with pytest.raises(KeyError):
        build_roster(["xgboost"])
    with pytest.raises(KeyError):
        build_roster(overrides={"knn": {"neighbours": 3}})
    with pytest.raises(KeyError):
        build_roster(overrides={"nope": {}})
    (knn,) = build_roster(["knn"], {"knn": {"k": 3}})
    assert knn.params == {"k": 3}


def test_parse_value():
    assert parse_value("3") == 3
    assert parse_value("0.5") == 0.5
    assert parse_value("(8, 4)") == (8, 4)
    assert parse_value("rbf") == "rbf"


def test_model_seeds_distinct():
    assert len({model_seed(0, k) for k in ROSTER_ORDER}) == 12
    assert model_seed(1, "ols") != model_seed(0, "ols")


@given(st.integers(2, 60), st.integers(2, 8), st.integers(0, 1000))
def test_kfold_assignment_balanced(n, k, seed):
    if n < k:
        return
    folds = kfold_assignment(n, k, seed)
    counts = np.bincount(folds, minlength=k)
    assert counts.sum() == n and counts.max() - counts.min() <= 1


def test_stacking_constant_bases_predict_mean(rng):
    X = rng.normal(size=(60, 3))
    y = rng.normal(size=60) * 4 + 10
    bases = [ModelSpec("m1", "mean", _mean_fit), ModelSpec("m2", "mean", _mean_fit)]
    model = fit_stacking(X, y, bases, k=5, seed=2)
    np.testing.assert_allclose(model.predict(rng.normal(size=(7, 3))), y.mean(), rtol=1e-10)


def test_stacking_oof_bookkeeping(rng):
    X = rng.normal(size=(47, 4))
    y = X @ [1.0, -2.0, 0.5, 0.0] + rng.normal(size=47)
    bases = build_roster(["ols", "knn"])
    model = fit_stacking(X, y, bases, k=4, seed=0)
    assert model.oof.shape == (47, 2)
    # every out-of-fold prediction came from the model that held that row out
    assert np.all(model.oof_source == model.folds[:, None])
    for f, used in enumerate(model.instance_folds):
        assert f not in used and len(used) == 3


def test_stacking_two_fold_unrolled(rng):
    X = rng.normal(size=(30, 3))
    y = X @ [2.0, 0.0, -1.0] + rng.normal(size=30)
    bases = [ROSTER["ols"], ModelSpec("mean", "mean", _mean_fit)]
    model = fit_stacking(X, y, bases, k=2, seed=11)

    seeds = np.random.SeedSequence(11).generate_state(3)
    folds = kfold_assignment(30, 2, int(seeds[-1]))
    oof = np.empty((30, 2))
    for f in range(2):
        hold = folds == f
        oof[hold, 0] = fit_ols(X[~hold], y[~hold]).predict(X[hold])
        oof[hold, 1] = y[~hold].mean()
    meta = fit_ols(oof, y)
    Xt = rng.normal(size=(5, 3))
    expected = meta.predict(np.column_stack([fit_ols(X, y).predict(Xt), np.full(5, y.mean())]))
    np.testing.assert_allclose(model.predict(Xt), expected, rtol=1e-12)


def test_stacking_argument_checks(rng):
    X, y = rng.normal(size=(10, 2)), rng.normal(size=10)
    two = build_roster(["ols", "knn"])
    with pytest.raises(FitError):
        fit_stacking(X, y, two, k=1)
    with pytest.raises(FitError):
        fit_stacking(X, y, two[:1], k=2)
    with pytest.raises(FitError):
        fit_stacking(X[:3], y[:3], two, k=5)


def test_benchmark_rows_in_roster_order(table):
    report = run_benchmark(table, ApproachSpec(1), build_roster(overrides=FAST))
    assert [r.key for r in report.rows] == list(ROSTER_ORDER)
    assert all(r.error is None for r in report.rows)
    lines = report.to_csv().splitlines()
    assert lines[0] == "model,mse,r2" and len(lines) == 13
    assert report.to_markdown().startswith("Approach 1 (seed 0, config ")


def test_benchmark_reproducible_and_jobs_invariant(table):
    roster = build_roster(overrides=FAST)
    a = run_benchmark(table, ApproachSpec(2), roster, seed=3)
    b = run_benchmark(table, ApproachSpec(2), roster, seed=3)
    c = run_benchmark(table, ApproachSpec(2), roster, seed=3, jobs=4)
    assert a.to_csv() == b.to_csv() == c.to_csv()
    assert a.to_markdown() == c.to_markdown()


def test_benchmark_seed_changes_results(table):
    roster = build_roster(["rf"], FAST)
    split = SplitSpec("random", 0.8, 0)
    a = run_benchmark(table, ApproachSpec(1), roster, split, seed=0)
    b = run_benchmark(table, ApproachSpec(1), roster, split, seed=1)
    assert a.to_csv() != b.to_csv()


def test_benchmark_error_rows(table):
    roster = [ROSTER["ols"], ModelSpec("bad", "Broken", _raising_fit), ModelSpec("nan", "NaN", _nan_fit)]
    report = run_benchmark(table, ApproachSpec(1), roster)
    ok, bad, nan = report.rows
    assert ok.error is None
    assert "deliberate" in bad.error and "non-finite" in nan.error
    assert report.to_csv().splitlines()[2] == "Broken,,"
    assert set(report.scatter) == {"ols"}
    assert "failed: FitError" in report.to_markdown()


def test_export_scatter(rng):
    a = rng.normal(size=25)
    sc = export_scatter(a, a, "perfect")
    assert sc.actual.size == sc.predicted.size == 25
    # every point of a perfect model lies on the identity line
    assert np.all(sc.actual == sc.predicted)
    (x0, y0), (x1, y1) = sc.identity
    assert x0 == y0 == a.min() and x1 == y1 == a.max()


def test_scatter_csv_round_trip(tmp_path, rng):
    sc = export_scatter(rng.normal(size=9), rng.normal(size=9), "m")
    write_scatter_csv(sc, tmp_path / "s.csv")
    back = read_scatter_csv(tmp_path / "s.csv", "m")
    np.testing.assert_array_equal(back.actual, sc.actual)
    np.testing.assert_array_equal(back.predicted, sc.predicted)
    assert back.identity == sc.identity
