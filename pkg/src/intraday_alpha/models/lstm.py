"""Single-layer LSTM classifier with exact backpropagation through time.

Architecture: LSTM over the sequence, dropout on the final hidden state
(training only, inverted scaling), dense layer to two logits, softmax.
Gate blocks are stored in the order input, forget, candidate, output.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from ..errors import EmptyTrainingSet, NonFiniteLoss, ShapeMismatch

logger = logging.getLogger(__name__)

PARAM_NAMES = ("W", "U", "b", "Wd", "bd")


def sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def softmax(z):
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def init_params(rng: np.random.Generator, n_inputs: int, n_hidden: int, n_classes: int = 2) -> Dict[str, np.ndarray]:
    """Glorot-uniform kernels, orthogonal recurrent kernel, forget-gate bias 1."""

    def glorot(fan_in, fan_out):
        lim = math.sqrt(6.0 / (fan_in + fan_out))
        return rng.uniform(-lim, lim, size=(fan_in, fan_out))

    a = rng.standard_normal((4 * n_hidden, n_hidden))
    q, r = np.linalg.qr(a)
    q = q * np.sign(np.diag(r))
    b = np.zeros(4 * n_hidden)
    b[n_hidden : 2 * n_hidden] = 1.0
    return {
        "W": glorot(n_inputs, 4 * n_hidden),
        "U": np.ascontiguousarray(q.T),
        "b": b,
        "Wd": glorot(n_hidden, n_classes),
        "bd": np.zeros(n_classes),
    }


def zero_params(n_inputs: int, n_hidden: int, n_classes: int = 2) -> Dict[str, np.ndarray]:
    return {
        "W": np.zeros((n_inputs, 4 * n_hidden)),
        "U": np.zeros((n_hidden, 4 * n_hidden)),
        "b": np.zeros(4 * n_hidden),
        "Wd": np.zeros((n_hidden, n_classes)),
        "bd": np.zeros(n_classes),
    }


def _check_input(params, x):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 2:
        x = x[None]
    if x.ndim != 3 or x.shape[2] != params["W"].shape[0]:
        raise ShapeMismatch(f"expected (batch, steps, {params['W'].shape[0]}) input, got {x.shape}")
    return x


def lstm_forward(params, x, training: bool = False, dropout_mask: Optional[np.ndarray] = None):
    """Run a ``(batch, steps, inputs)`` batch; returns ``(probs, cache)``.

    ``dropout_mask`` is the already-scaled multiplier for the last hidden
    state and is only applied when ``training`` is true.
    """
    x = _check_input(params, x)
    B, T, _ = x.shape
    H = params["U"].shape[0]
    xp = np.einsum("btd,dk->tbk", x, params["W"]) + params["b"]
    gates = np.empty((T, B, 4 * H))
    cs = np.zeros((T + 1, B, H))
    hs = np.zeros((T + 1, B, H))
    tcs = np.empty((T, B, H))
    U = params["U"]
    for t in range(T):
        a = xp[t] + hs[t] @ U
        g = gates[t]
        g[:, : 2 * H] = sigmoid(a[:, : 2 * H])
        g[:, 2 * H : 3 * H] = np.tanh(a[:, 2 * H : 3 * H])
        g[:, 3 * H :] = sigmoid(a[:, 3 * H :])
        cs[t + 1] = g[:, H : 2 * H] * cs[t] + g[:, :H] * g[:, 2 * H : 3 * H]
        tcs[t] = np.tanh(cs[t + 1])
        hs[t + 1] = g[:, 3 * H :] * tcs[t]
    h_last = hs[T]
    mask = dropout_mask if (training and dropout_mask is not None) else None
    z = h_last * mask if mask is not None else h_last
    probs = softmax(z @ params["Wd"] + params["bd"])
    cache = {"x": x, "gates": gates, "cs": cs, "hs": hs, "tcs": tcs, "z": z, "mask": mask, "probs": probs}
    return probs, cache


def lstm_predict(params, x, batch_size: int = 4096) -> np.ndarray:
    """Class probabilities without keeping activations (inference, dropout off)."""
    x = _check_input(params, x) if not hasattr(x, "subset") else x
    out = []
    H = params["U"].shape[0]
    for lo in range(0, len(x), batch_size):
        xb = np.asarray(x[lo : lo + batch_size], dtype=np.float64)
        xp = np.einsum("btd,dk->tbk", xb, params["W"]) + params["b"]
        c = np.zeros((xb.shape[0], H))
        h = np.zeros((xb.shape[0], H))
        for t in range(xb.shape[1]):
            a = xp[t] + h @ params["U"]
            i = sigmoid(a[:, :H])
            f = sigmoid(a[:, H : 2 * H])
            g = np.tanh(a[:, 2 * H : 3 * H])
            o = sigmoid(a[:, 3 * H :])
            c = f * c + i * g
            h = o * np.tanh(c)
        out.append(softmax(h @ params["Wd"] + params["bd"]))
    if not out:
        return np.empty((0, params["bd"].shape[0]))
    return np.concatenate(out)


def cross_entropy(probs, y) -> float:
    """Mean categorical cross-entropy against integer class labels."""
    y = np.asarray(y, dtype=np.int64)
    p = probs[np.arange(len(y)), y]
    return float(-np.mean(np.log(np.clip(p, 1e-300, None))))


def lstm_backward(params, cache, y) -> Dict[str, np.ndarray]:
    """Gradients of the mean cross-entropy of ``y`` w.r.t. every parameter."""
    y = np.asarray(y, dtype=np.int64)
    x, gates, cs, hs, tcs = cache["x"], cache["gates"], cache["cs"], cache["hs"], cache["tcs"]
    B, T, _ = x.shape
    H = params["U"].shape[0]
    dlogits = cache["probs"].copy()
    dlogits[np.arange(B), y] -= 1.0
    dlogits /= B
    grads = {
        "Wd": cache["z"].T @ dlogits,
        "bd": dlogits.sum(axis=0),
    }
    dh = dlogits @ params["Wd"].T
    if cache["mask"] is not None:
        dh = dh * cache["mask"]
    dc = np.zeros((B, H))
    da = np.empty((T, B, 4 * H))
    UT = params["U"].T
    for t in range(T - 1, -1, -1):
        g = gates[t]
        i, f, cand, o = g[:, :H], g[:, H : 2 * H], g[:, 2 * H : 3 * H], g[:, 3 * H :]
        tc = tcs[t]
        dc = dc + dh * o * (1.0 - tc * tc)
        d = da[t]
        d[:, :H] = dc * cand * i * (1.0 - i)
        d[:, H : 2 * H] = dc * cs[t] * f * (1.0 - f)
        d[:, 2 * H : 3 * H] = dc * i * (1.0 - cand * cand)
        d[:, 3 * H :] = dh * tc * o * (1.0 - o)
        dc = dc * f
        dh = d @ UT
    grads["W"] = np.einsum("btd,tbk->dk", x, da)
    grads["U"] = np.einsum("tbh,tbk->hk", hs[:T], da)
    grads["b"] = da.sum(axis=(0, 1))
    return grads


def loss_and_grads(params, x, y, dropout_mask=None):
    probs, cache = lstm_forward(params, x, training=dropout_mask is not None, dropout_mask=dropout_mask)
    return cross_entropy(probs, y), lstm_backward(params, cache, y)


def gradient_check(params, x, y, step: float = 1e-5, dropout_mask=None, floor: float = 1e-8) -> float:
    """Largest elementwise relative error between analytic and central-difference gradients.

    The relative error of one entry is ``|a - n| / max(|a|, |n|, floor)``;
    ``floor`` keeps entries whose true gradient is ~0 from dividing by noise.
    """
    _, grads = loss_and_grads(params, x, y, dropout_mask)
    worst = 0.0
    for k, p in params.items():
        flat = p.reshape(-1)
        for j in range(flat.size):
            old = flat[j]
            flat[j] = old + step
            up, _ = loss_and_grads(params, x, y, dropout_mask)
            flat[j] = old - step
            down, _ = loss_and_grads(params, x, y, dropout_mask)
            flat[j] = old
            num = (up - down) / (2 * step)
            ana = grads[k].reshape(-1)[j]
            worst = max(worst, abs(ana - num) / max(abs(ana), abs(num), floor))
    return worst


@dataclass
class RMSPropState:
    accumulators: Dict[str, np.ndarray] = field(default_factory=dict)


def rmsprop_step(params, grads, state: RMSPropState, learning_rate=0.001, rho=0.9, epsilon=1e-7):
    """One RMSProp update; returns new ``(params, state)`` and leaves inputs untouched."""
    new_params, new_acc = {}, {}
    for k, p in params.items():
        g = grads[k]
        if g.shape != p.shape:
            raise ShapeMismatch(f"gradient for {k} has shape {g.shape}, parameter {p.shape}")
        acc = state.accumulators.get(k)
        acc = np.zeros_like(p) if acc is None else acc
        acc = rho * acc + (1.0 - rho) * g * g
        new_acc[k] = acc
        new_params[k] = p - learning_rate * g / (np.sqrt(acc) + epsilon)
    return new_params, RMSPropState(new_acc)


@dataclass
class TrainingHistory:
    train_loss: List[float] = field(default_factory=list)
    val_loss: List[float] = field(default_factory=list)
    epoch_seconds: List[float] = field(default_factory=list)
    best_epoch: int = -1
    stopped_early: bool = False

    @property
    def epochs_run(self) -> int:
        return len(self.train_loss)


def batch_loss(params, x, y, batch_size: int = 4096) -> float:
    if len(y) == 0:
        return float("nan")
    probs = lstm_predict(params, x, batch_size)
    return cross_entropy(probs, y)


def train_lstm(
    x,
    y,
    rng: np.random.Generator,
    hidden_units: int = 25,
    dropout_rate: float = 0.1,
    learning_rate: float = 0.001,
    batch_size: int = 512,
    patience: int = 10,
    validation_fraction: float = 0.2,
    max_epochs: int = 1000,
    rho: float = 0.9,
    epsilon: float = 1e-7,
    shuffle: bool = True,
    params: Optional[Dict[str, np.ndarray]] = None,
):
    """Minibatch RMSProp training with early stopping on validation loss.

    The validation set is the final ``validation_fraction`` of the rows as
    given (no shuffling before the cut).  Training rows are reshuffled every
    epoch.  The returned parameters are those of the best validation epoch.
    """
    y = np.asarray(y, dtype=np.int64)
    n = len(y)
    split_at = int(n * (1.0 - validation_fraction))
    if split_at == 0:
        raise EmptyTrainingSet("no rows left for training after the validation cut")
    n_inputs = x.shape[2]
    if params is None:
        params = init_params(rng, n_inputs, hidden_units, 2)
    has_val = split_at < n
    val_idx = np.arange(split_at, n)
    x_val = x[val_idx] if has_val else None
    y_val = y[val_idx]
    state = RMSPropState()
    history = TrainingHistory()
    best = math.inf
    best_params = {k: v.copy() for k, v in params.items()}
    wait = 0
    keep = 1.0 - dropout_rate
    for epoch in range(max_epochs):
        t0 = time.perf_counter()
        order = rng.permutation(split_at) if shuffle else np.arange(split_at)
        seen, total = 0, 0.0
        for lo in range(0, split_at, batch_size):
            rows = order[lo : lo + batch_size]
            xb = np.asarray(x[rows], dtype=np.float64)
            mask = None
            if dropout_rate > 0:
                mask = (rng.random((len(rows), hidden_units)) < keep) / keep
            loss, grads = loss_and_grads(params, xb, y[rows], mask)
            if not math.isfinite(loss):
                raise NonFiniteLoss(f"training loss became {loss} in epoch {epoch}")
            params, state = rmsprop_step(params, grads, state, learning_rate, rho, epsilon)
            total += loss * len(rows)
            seen += len(rows)
        history.train_loss.append(total / seen)
        val = batch_loss(params, x_val, y_val) if has_val else total / seen
        if not math.isfinite(val):
            raise NonFiniteLoss(f"validation loss became {val} in epoch {epoch}")
        history.val_loss.append(val)
        history.epoch_seconds.append(time.perf_counter() - t0)
        logger.debug("epoch %d train %.5f val %.5f", epoch, history.train_loss[-1], val)
        if val < best:
            best = val
            best_params = {k: v.copy() for k, v in params.items()}
            history.best_epoch = epoch
            wait = 0
        else:
            wait += 1
            if wait >= patience:
                history.stopped_early = True
                break
    return best_params, history


@dataclass(eq=False)
class LstmNetwork:
    params: Dict[str, np.ndarray]
    history: Optional[TrainingHistory] = None

    @property
    def hidden_units(self) -> int:
        return self.params["U"].shape[0]

    @property
    def n_inputs(self) -> int:
        return self.params["W"].shape[0]

    def predict_proba(self, x) -> np.ndarray:
        """Probability of class 1 for each sequence."""
        if len(x) == 0:
            return np.empty(0)
        if x.shape[-1] != self.n_inputs:
            raise ShapeMismatch(f"expected {self.n_inputs} input features, got {x.shape[-1]}")
        return lstm_predict(self.params, x)[:, 1]
