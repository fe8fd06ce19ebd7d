import numpy as np
import pytest

from ozonecast.errors import DivergenceError, PredictError
from ozonecast.neural import (
    gradient_check,
    init_mlp,
    loss_and_gradients,
    nudge_off_kinks,
    predict_mlp,
    train_mlp,
)


def _batch(seed, n=32, p=6):
    r = np.random.default_rng(seed)
    return r.normal(size=(n, p)), r.normal(size=n)


def test_init_deterministic_and_zero_biases():
    a = init_mlp(70, 150, "tanh", seed=3)
    b = init_mlp(70, 150, "tanh", seed=3)
    np.testing.assert_array_equal(a.W1, b.W1)
    np.testing.assert_array_equal(a.w2, b.w2)
    assert np.all(a.b1 == 0) and a.b2 == 0.0
    lim = np.sqrt(6 / (70 + 150))
    assert np.all(np.abs(a.W1) <= lim)


def test_init_weight_mean_near_zero():
    W = init_mlp(70, 150, "tanh", seed=0).W1
    lim = np.sqrt(6 / 220)
    se = (lim / np.sqrt(3)) / np.sqrt(W.size)
    assert abs(W.mean()) <= 3 * se


def test_init_argument_checks():
    with pytest.raises(ValueError):
        init_mlp(0, 3)
    with pytest.raises(ValueError):
        init_mlp(3, 3, "sigmoid")


@pytest.mark.parametrize("seed", range(5))
def test_gradient_check_tanh(seed):
    X, y = _batch(seed)
    assert gradient_check(init_mlp(6, 16, "tanh", seed), X, y) < 1e-4


@pytest.mark.parametrize("seed", range(5))
def test_gradient_check_relu_off_kinks(seed):
    X, y = _batch(seed)
    model = init_mlp(6, 16, "relu", seed)
    model.b1[:] = np.random.default_rng(seed).normal(scale=0.1, size=16)
    assert gradient_check(model, nudge_off_kinks(model, X), y) < 1e-4


def test_gradient_check_after_training():
    X, y = _batch(9, n=64)
    model, _ = train_mlp(init_mlp(6, 8, "tanh", 1), X, y, epochs=20)
    assert gradient_check(model, X[:32], y[:32]) < 1e-4


def test_gradient_check_batch_limit():
    X, y = _batch(0, n=33)
    with pytest.raises(ValueError):
        gradient_check(init_mlp(6, 4), X, y)


def test_zero_output_weights_annihilate_hidden_gradients():
    X, y = _batch(1)
    model = init_mlp(6, 10, "tanh", 0)
    model.w2[:] = 0.0
    _, (dW1, db1, dw2, db2) = loss_and_gradients(model, X, y)
    assert np.all(dW1 == 0) and np.all(db1 == 0)


def test_zero_weights_predict_bias():
    model = init_mlp(4, 5)
    model.W1[:] = 0
    model.w2[:] = 0
    model.b2 = 1.25
    np.testing.assert_array_equal(predict_mlp(model, np.ones((3, 4))), np.full(3, 1.25))


def test_tanh_output_bounded(rng):
    model = init_mlp(5, 12, "tanh", 2)
    model.b2 = 0.4
    pred = model.predict(rng.normal(scale=10, size=(50, 5)))
    assert np.all(np.abs(pred - model.b2) <= np.abs(model.w2).sum() + 1e-12)


def test_batch_equals_rowwise(rng):
    model = init_mlp(5, 12, "relu", 4)
    X = rng.normal(size=(20, 5))
    batch = model.predict(X)
    rows = np.array([model.predict(X[i])[0] for i in range(20)])
    np.testing.assert_allclose(batch, rows, rtol=1e-12, atol=1e-12)


def test_dimension_check():
    with pytest.raises(PredictError):
        init_mlp(3, 2).predict(np.zeros((1, 4)))


def test_learns_linear_target():
    r = np.random.default_rng(0)
    X = r.normal(size=(200, 4))
    y = X @ np.array([0.5, -0.3, 0.2, 0.1])
    model, trace = train_mlp(init_mlp(4, 16, "tanh", 0), X, y, epochs=500)
    assert trace[-1] < 0.01 * y.var()


def test_zero_learning_rate_freezes_parameters():
    X, y = _batch(2)
    start = init_mlp(6, 5, "tanh", 1)
    trained, trace = train_mlp(start, X, y, epochs=7, learning_rate=0.0)
    assert len(trace) == 7
    np.testing.assert_array_equal(trained.W1, start.W1)
    np.testing.assert_array_equal(trained.w2, start.w2)
    assert trained.b2 == start.b2


def test_training_deterministic():
    X, y = _batch(3, n=100)
    a, ta = train_mlp(init_mlp(6, 8, "relu", 5), X, y, epochs=10)
    b, tb = train_mlp(init_mlp(6, 8, "relu", 5), X, y, epochs=10)
    np.testing.assert_array_equal(ta, tb)
    np.testing.assert_array_equal(a.W1, b.W1)


def test_divergence_reported():
    X, y = _batch(4)
    with pytest.raises(DivergenceError) as info, np.errstate(all="ignore"):
        train_mlp(init_mlp(6, 4, "relu", 0), X, y * 1e200, epochs=3)
    assert info.value.epoch == 0


def test_default_run_parameters_stay_bounded():
    r = np.random.default_rng(6)
    X = r.normal(size=(300, 10))
    y = X[:, 0] * X[:, 1] + r.normal(size=300)
    model, _ = train_mlp(init_mlp(10, 150, "tanh", 0), X, y)
    assert max(np.abs(a).max() for a in model.params()) < 1e6
