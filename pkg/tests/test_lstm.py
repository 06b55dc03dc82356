import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from intraday_alpha.errors import ShapeMismatch
from intraday_alpha.models.lstm import (
    LstmNetwork,
    RMSPropState,
    cross_entropy,
    gradient_check,
    init_params,
    loss_and_grads,
    lstm_forward,
    lstm_predict,
    rmsprop_step,
    softmax,
    train_lstm,
    zero_params,
)


def toy(seed, hidden=4, steps=6, inputs=3, batch=5):
    rng = np.random.default_rng(seed)
    params = init_params(rng, inputs, hidden)
    params = {k: v + 0.3 * rng.standard_normal(v.shape) for k, v in params.items()}
    x = rng.standard_normal((batch, steps, inputs))
    y = rng.integers(0, 2, batch)
    return params, x, y


def naive_step(params, x_t, h, c):
    """One cell step written gate by gate."""
    H = len(h)
    a = x_t @ params["W"] + h @ params["U"] + params["b"]
    sig = lambda v: 1 / (1 + np.exp(-v))
    i, f, g, o = sig(a[:H]), sig(a[H:2 * H]), np.tanh(a[2 * H:3 * H]), sig(a[3 * H:])
    c = f * c + i * g
    return o * np.tanh(c), c


def test_forward_matches_naive_loop():
    params, x, _ = toy(0)
    probs, _ = lstm_forward(params, x)
    for b in range(len(x)):
        h = np.zeros(4)
        c = np.zeros(4)
        for t in range(x.shape[1]):
            h, c = naive_step(params, x[b, t], h, c)
        logits = h @ params["Wd"] + params["bd"]
        want = np.exp(logits) / np.exp(logits).sum()
        np.testing.assert_allclose(probs[b], want, rtol=0, atol=1e-14)
    np.testing.assert_allclose(lstm_predict(params, x), probs, rtol=0, atol=1e-15)


@pytest.mark.parametrize("seed", range(5))
def test_gradient_check(seed):
    params, x, y = toy(seed)
    assert gradient_check(params, x, y) < 1e-4


def test_gradient_check_with_dropout_mask():
    params, x, y = toy(11)
    mask = (np.random.default_rng(1).random((5, 4)) < 0.8) / 0.8
    assert gradient_check(params, x, y, dropout_mask=mask) < 1e-4


def test_zero_weights_give_half():
    params = zero_params(3, 25)
    x = np.random.default_rng(0).standard_normal((7, 240, 3)) * 10
    probs, _ = lstm_forward(params, x)
    assert np.all(probs == 0.5)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10_000), scale=st.floats(0.01, 50))
def test_softmax_normalised(seed, scale):
    params, x, _ = toy(seed)
    probs, _ = lstm_forward(params, x * scale)
    assert np.all(np.abs(probs.sum(axis=1) - 1.0) <= 1e-12)
    assert np.all((probs >= 0) & (probs <= 1))


def test_softmax_extreme_logits():
    p = softmax(np.array([[1000.0, -1000.0], [5.0, 5.0]]))
    assert np.isfinite(p).all()
    np.testing.assert_array_equal(p[1], [0.5, 0.5])


def test_doubling_input_changes_activations_and_stays_bounded():
    params, x, _ = toy(3, steps=240)
    params["b"] = np.zeros_like(params["b"])
    p1, c1 = lstm_forward(params, x)
    p2, c2 = lstm_forward(params, 2 * x)
    assert not np.allclose(c1["hs"], c2["hs"])
    assert np.isfinite(p2).all() and ((0 <= p2) & (p2 <= 1)).all()


def test_gradient_vanishes_when_loss_vanishes():
    params = zero_params(3, 4)
    params["bd"] = np.array([-40.0, 40.0])
    x = np.random.default_rng(0).standard_normal((4, 6, 3))
    y = np.ones(4, dtype=int)
    loss, grads = loss_and_grads(params, x, y)
    assert loss < 1e-30
    assert max(np.abs(g).max() for g in grads.values()) < 1e-30


def test_duplicated_batch_same_gradient():
    params, x, y = toy(4)
    _, g1 = loss_and_grads(params, x, y)
    _, g2 = loss_and_grads(params, np.concatenate([x, x]), np.concatenate([y, y]))
    for k in g1:
        np.testing.assert_allclose(g1[k], g2[k], rtol=1e-12, atol=1e-15)


def test_rmsprop_zero_gradient():
    params, _, _ = toy(0)
    zeros = {k: np.zeros_like(v) for k, v in params.items()}
    new, _ = rmsprop_step(params, zeros, RMSPropState())
    for k in params:
        np.testing.assert_array_equal(new[k], params[k])


def test_rmsprop_first_step():
    p = {"W": np.array([1.0, -2.0, 0.5])}
    g = {"W": np.array([0.3, -0.01, 2.0])}
    new, state = rmsprop_step(p, g, RMSPropState(), learning_rate=0.001, rho=0.9, epsilon=1e-7)
    want = p["W"] - 0.001 * g["W"] / (np.sqrt(0.1 * g["W"] ** 2) + 1e-7)
    np.testing.assert_allclose(new["W"], want, rtol=0, atol=1e-15)
    np.testing.assert_allclose(state.accumulators["W"], 0.1 * g["W"] ** 2)
    assert p["W"][0] == 1.0  # inputs untouched


def test_rmsprop_constant_gradient_step_size_approaches_lr():
    p = {"W": np.zeros(1)}
    g = {"W": np.array([0.02])}
    state = RMSPropState()
    for _ in range(300):
        old = p["W"].copy()
        p, state = rmsprop_step(p, g, state, learning_rate=0.001)
    assert abs(old[0] - p["W"][0]) == pytest.approx(0.001, rel=1e-4)


def test_rmsprop_shape_check():
    with pytest.raises(ShapeMismatch):
        rmsprop_step({"W": np.zeros(2)}, {"W": np.zeros(3)}, RMSPropState())


def test_constant_inputs_converge_to_ln2():
    x = np.zeros((8, 240, 3))
    y = np.array([0, 1] * 4)
    _, hist = train_lstm(x, y, np.random.default_rng(0), hidden_units=25, batch_size=512, max_epochs=400,
                         learning_rate=0.01)
    assert hist.val_loss[hist.best_epoch] == pytest.approx(math.log(2), abs=0.05)


def test_early_stopping_restores_best():
    rng = np.random.default_rng(1)
    x = rng.standard_normal((120, 10, 3))
    y = rng.integers(0, 2, 120)
    best, hist = train_lstm(x, y, np.random.default_rng(2), hidden_units=4, batch_size=16, patience=3,
                            max_epochs=60, learning_rate=0.05)
    assert hist.val_loss[hist.best_epoch] == min(hist.val_loss)
    assert hist.stopped_early
    assert hist.epochs_run == hist.best_epoch + 1 + 3
    val = cross_entropy(lstm_predict(best, x[96:]), y[96:])
    assert val == pytest.approx(hist.val_loss[hist.best_epoch], abs=1e-12)


def test_training_reproducible():
    rng = np.random.default_rng(5)
    x = rng.standard_normal((60, 8, 3))
    y = rng.integers(0, 2, 60)
    a, ha = train_lstm(x, y, np.random.default_rng(9), hidden_units=3, max_epochs=5, batch_size=16)
    b, hb = train_lstm(x, y, np.random.default_rng(9), hidden_units=3, max_epochs=5, batch_size=16)
    assert ha.val_loss == hb.val_loss
    for k in a:
        np.testing.assert_array_equal(a[k], b[k])


def test_network_inference_deterministic():
    params, x, _ = toy(2)
    net = LstmNetwork(params)
    p = net.predict_proba(np.concatenate([x[:1], x[:1]]))
    assert p[0] == p[1]
    np.testing.assert_array_equal(net.predict_proba(x), net.predict_proba(x))
    with pytest.raises(ShapeMismatch):
        net.predict_proba(np.zeros((2, 6, 4)))


def test_init_shapes():
    p = init_params(np.random.default_rng(0), 3, 25)
    assert p["W"].shape == (3, 100) and p["U"].shape == (25, 100) and p["Wd"].shape == (25, 2)
    np.testing.assert_allclose(p["U"] @ p["U"].T, np.eye(25), atol=1e-12)
    assert np.all(p["b"][25:50] == 1.0) and np.all(p["b"][:25] == 0)
