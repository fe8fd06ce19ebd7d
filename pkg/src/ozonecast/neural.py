"""Single-hidden-layer perceptron regressor trained with Adam on mean squared error."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DivergenceError, PredictError

ACTIVATIONS = ("tanh", "relu")


@dataclass
class MlpModel:
    W1: np.ndarray  # (hidden, p)
    b1: np.ndarray
    w2: np.ndarray  # (hidden,)
    b2: float
    activation: str
    seed: int
    # Adam moment accumulators, same layout as the parameters
    m: list = field(default_factory=list, repr=False)
    v: list = field(default_factory=list, repr=False)
    step: int = 0
    loss_trace: np.ndarray = field(default_factory=lambda: np.empty(0), repr=False)

    @property
    def hidden(self) -> int:
        return self.W1.shape[0]

    @property
    def n_features(self) -> int:
        return self.W1.shape[1]

    def params(self) -> list:
        return [self.W1, self.b1, self.w2, np.array([self.b2])]

    def copy(self) -> "MlpModel":
        return MlpModel(self.W1.copy(), self.b1.copy(), self.w2.copy(), float(self.b2),
                        self.activation, self.seed, [a.copy() for a in self.m],
                        [a.copy() for a in self.v], self.step, self.loss_trace.copy())

    def predict(self, X) -> np.ndarray:
        return predict_mlp(self, X)


def init_mlp(p: int, hidden: int, activation: str = "tanh", seed: int = 0) -> MlpModel:
    """Glorot-uniform weights, zero biases."""
    if p < 1 or hidden < 1:
        raise ValueError("p and hidden must be >= 1")
    if activation not in ACTIVATIONS:
        raise ValueError(f"activation must be one of {ACTIVATIONS}")
    rng = np.random.default_rng(seed)
    lim1 = np.sqrt(6.0 / (p + hidden))
    lim2 = np.sqrt(6.0 / (hidden + 1))
    W1 = rng.uniform(-lim1, lim1, size=(hidden, p))
    w2 = rng.uniform(-lim2, lim2, size=hidden)
    model = MlpModel(W1, np.zeros(hidden), w2, 0.0, activation, seed)
    model.m = [np.zeros_like(a) for a in model.params()]
    model.v = [np.zeros_like(a) for a in model.params()]
    return model


def _act(z, kind):
    return np.tanh(z) if kind == "tanh" else np.maximum(z, 0.0)


def _act_grad(z, a, kind):
    return 1.0 - a * a if kind == "tanh" else (z > 0.0).astype(float)


def _forward(model: MlpModel, X):
    Z = X @ model.W1.T + model.b1
    A = _act(Z, model.activation)
    out = A @ model.w2 + model.b2
    return Z, A, out


def _check_X(model: MlpModel, X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[1] != model.n_features:
        raise PredictError(f"expected {model.n_features} features, got {X.shape[1]}")
    return X


def predict_mlp(model: MlpModel, X) -> np.ndarray:
    X = _check_X(model, X)
    return _forward(model, X)[2]


def loss_and_gradients(model: MlpModel, X, y):
    """Mean squared error and its gradients (dW1, db1, dw2, db2)."""
    X = _check_X(model, X)
    y = np.asarray(y, dtype=float)
    Z, A, out = _forward(model, X)
    err = out - y
    loss = float(np.mean(err * err))
    d_out = 2.0 * err / y.size
    dw2 = A.T @ d_out
    db2 = float(d_out.sum())
    dZ = np.outer(d_out, model.w2) * _act_grad(Z, A, model.activation)
    dW1 = dZ.T @ X
    db1 = dZ.sum(axis=0)
    return loss, [dW1, db1, dw2, np.array([db2])]


def train_mlp(
    model: MlpModel,
    X,
    y,
    epochs: int = 200,
    batch_size: int = 32,
    learning_rate: float = 1e-3,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> tuple[MlpModel, np.ndarray]:
    """Mini-batch Adam; returns a trained copy and the per-epoch training MSE.

    Batches are reshuffled every epoch from a generator seeded by the model's
    seed, so a run is reproducible from (seed, data, config).
    """
    X = _check_X(model, X)
    y = np.asarray(y, dtype=float)
    sd = X.std(axis=0)
    if np.any(np.abs(X.mean(axis=0)) > 0.5) or np.any(sd > 5.0):
        warnings.warn("MLP inputs do not look standardized", stacklevel=2)
    model = model.copy()
    params = [model.W1, model.b1, model.w2, np.array([model.b2])]
    if not model.m:
        model.m = [np.zeros_like(a) for a in params]
        model.v = [np.zeros_like(a) for a in params]
    rng = np.random.default_rng([model.seed, 1])
    n = y.size
    trace = np.empty(epochs)
    for epoch in range(epochs):
        perm = rng.permutation(n)
        total = 0.0
        for s in range(0, n, batch_size):
            idx = perm[s : s + batch_size]
            model.b2 = float(params[3][0])
            loss, grads = loss_and_gradients(model, X[idx], y[idx])
            total += loss * idx.size
            model.step += 1
            c1 = 1.0 - beta1**model.step
            c2 = 1.0 - beta2**model.step
            for prm, g, m, v in zip(params, grads, model.m, model.v):
                m *= beta1
                m += (1.0 - beta1) * g
                v *= beta2
                v += (1.0 - beta2) * g * g
                prm -= learning_rate * (m / c1) / (np.sqrt(v / c2) + eps)
        model.b2 = float(params[3][0])
        trace[epoch] = total / n
        if not np.isfinite(trace[epoch]):
            raise DivergenceError(epoch)
    model.loss_trace = np.concatenate([model.loss_trace, trace])
    return model, trace


def gradient_check(model: MlpModel, X, y, step: float = 1e-5) -> float:
    """Max relative error between backprop and central differences over all parameters.

    Each difference L(theta+h) - L(theta-h) is formed from the perturbed
    hidden unit alone, (e+ - e-)(e+ + e-) averaged over rows, instead of
    subtracting two full losses; the quotient is the same central difference
    without the roundoff of summing every other unit.
    """
    X = _check_X(model, X)
    y = np.asarray(y, dtype=float)
    if X.shape[0] > 32:
        raise ValueError("gradient_check expects a batch of at most 32 rows")
    _, analytic = loss_and_gradients(model, X, y)
    Z, A, out = _forward(model, X)
    e2 = 2.0 * (out - y)
    act = model.activation
    numeric = [np.empty_like(g) for g in analytic]

    def unit_delta(k, shift):
        zp = Z[:, k] + shift
        zm = Z[:, k] - shift
        ap = _act(zp, act)
        am = _act(zm, act)
        d_out = model.w2[k] * (ap - am)
        s_out = e2 + model.w2[k] * (ap + am - 2.0 * A[:, k])
        return np.mean(d_out * s_out) / (2.0 * step)

    for k in range(model.hidden):
        for j in range(model.n_features):
            numeric[0][k, j] = unit_delta(k, step * X[:, j])
        numeric[1][k] = unit_delta(k, step)
        numeric[2][k] = np.mean(2.0 * step * A[:, k] * e2) / (2.0 * step)
    numeric[3][0] = np.mean(2.0 * step * e2) / (2.0 * step)

    worst = 0.0
    for ga, gn in zip(analytic, numeric):
        ga = ga.ravel()
        gn = gn.ravel()
        denom = np.maximum(np.maximum(np.abs(ga), np.abs(gn)), 1e-8)
        worst = max(worst, float(np.max(np.abs(ga - gn) / denom)))
    return worst


def _loss(model: MlpModel, X, y) -> float:
    _, _, out = _forward(model, X)
    err = out - y
    return float(np.mean(err * err))


def nudge_off_kinks(model: MlpModel, X, margin: float = 1e-3, seed: int = 0, max_tries: int = 1000):
    """Perturb rows of X until every hidden pre-activation is at least ``margin`` from zero.

    Finite differences across a relu kink are meaningless, so relu gradient
    checks run on batches prepared this way.
    """
    X = _check_X(model, X).copy()
    rng = np.random.default_rng(seed)
    for _ in range(max_tries):
        Z = X @ model.W1.T + model.b1
        bad = np.flatnonzero((np.abs(Z) < margin).any(axis=1))
        if bad.size == 0:
            return X
        X[bad] += rng.normal(scale=10 * margin, size=(bad.size, X.shape[1]))
    raise RuntimeError("could not move batch away from activation kinks")
