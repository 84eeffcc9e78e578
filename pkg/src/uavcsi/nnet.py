"""Minimal dense/conv neural-network engine for the three fixed receivers.

Everything is double precision numpy.  Parameters live in flat dicts of
arrays so the Adam state, serialization, and finite-difference checks can
treat every architecture uniformly.  The three graphs are fixed:

* sensing net:   3x3 conv (1 kernel, same padding, ReLU) -> maxpool with
  window/stride (3, 6) -> flatten -> dense -> sigmoid
* aid net:       dense 2N -> 4N (LReLU 0.01) -> dense -> 2N (linear)
* recovery net:  dense 2N -> 4*La*N (tanh) -> dense -> 2*La*N (linear)

The (3, 6) pool window turns the (La, 2N) input into exactly
(floor(La/3), floor(N/3)) features; remainder rows/columns are dropped.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .config import AdamConfig
from .errors import ConfigurationError, TrainingDivergedError

LRELU_SLOPE = 0.01
POOL_WIN = (3, 6)


# ---------------------------------------------------------------------------
# activations

def _act(a: np.ndarray, kind: str) -> np.ndarray:
    if kind == "linear":
        return a
    if kind == "relu":
        return np.maximum(a, 0.0)
    if kind == "lrelu":
        return np.where(a > 0.0, a, LRELU_SLOPE * a)
    if kind == "tanh":
        return np.tanh(a)
    if kind == "sigmoid":
        return 1.0 / (1.0 + np.exp(-a))
    raise ConfigurationError(f"unknown activation {kind!r}")


def _act_grad(a: np.ndarray, out: np.ndarray, kind: str) -> np.ndarray:
    if kind == "linear":
        return np.ones_like(a)
    if kind == "relu":
        return (a > 0.0).astype(float)
    if kind == "lrelu":
        return np.where(a > 0.0, 1.0, LRELU_SLOPE)
    if kind == "tanh":
        return 1.0 - out * out
    if kind == "sigmoid":
        return out * (1.0 - out)
    raise ConfigurationError(f"unknown activation {kind!r}")


def glorot(rng: np.random.Generator, fan_out: int, fan_in: int, shape=None):
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape or (fan_out, fan_in))


# ---------------------------------------------------------------------------
# conv / pool primitives (single channel, single 3x3 kernel)

def conv3x3_forward(x: np.ndarray, kernel: np.ndarray, bias: float):
    """Same-padded 3x3 correlation over a (B, H, W) batch."""
    xp = np.pad(x, ((0, 0), (1, 1), (1, 1)))
    h, w = x.shape[1], x.shape[2]
    a = np.full(x.shape, float(bias))
    for u in range(3):
        for v in range(3):
            a += kernel[u, v] * xp[:, u:u + h, v:v + w]
    return a, xp


def conv3x3_backward(da: np.ndarray, xp: np.ndarray, kernel: np.ndarray):
    h, w = da.shape[1], da.shape[2]
    dk = np.empty((3, 3))
    dxp = np.zeros_like(xp)
    for u in range(3):
        for v in range(3):
            dk[u, v] = np.sum(da * xp[:, u:u + h, v:v + w])
            dxp[:, u:u + h, v:v + w] += kernel[u, v] * da
    return dk, float(da.sum()), dxp[:, 1:-1, 1:-1]


def pool_out_shape(h: int, w: int) -> tuple[int, int]:
    return h // POOL_WIN[0], w // POOL_WIN[1]


def maxpool_forward(x: np.ndarray):
    b, h, w = x.shape
    h2, w2 = pool_out_shape(h, w)
    ph, pw = POOL_WIN
    r = (x[:, :h2 * ph, :w2 * pw]
         .reshape(b, h2, ph, w2, pw)
         .transpose(0, 1, 3, 2, 4)
         .reshape(b, h2, w2, ph * pw))
    idx = r.argmax(axis=3)
    out = np.take_along_axis(r, idx[..., None], axis=3)[..., 0]
    return out, idx


def maxpool_backward(dout: np.ndarray, idx: np.ndarray, x_shape):
    b, h, w = x_shape
    h2, w2 = pool_out_shape(h, w)
    ph, pw = POOL_WIN
    dr = np.zeros((b, h2, w2, ph * pw))
    np.put_along_axis(dr, idx[..., None], dout[..., None], axis=3)
    dx = np.zeros(x_shape)
    dx[:, :h2 * ph, :w2 * pw] = (dr.reshape(b, h2, w2, ph, pw)
                                 .transpose(0, 1, 3, 2, 4)
                                 .reshape(b, h2 * ph, w2 * pw))
    return dx


# ---------------------------------------------------------------------------
# architectures

class SensingNet:
    """Conv -> pool -> dense -> sigmoid classifier on (La, 2N) inputs."""

    def __init__(self, la: int, n: int):
        self.la, self.n = la, n
        self.in_shape = (la, 2 * n)
        rows, cols = pool_out_shape(la, 2 * n)
        self.n_features = rows * cols

    def init_params(self, rng: np.random.Generator) -> dict:
        return {
            "conv.k": glorot(rng, 9, 9, shape=(3, 3)),
            "conv.b": np.zeros(1),
            "out.w": glorot(rng, 1, self.n_features),
            "out.b": np.zeros(1),
        }

    def forward(self, params: dict, x: np.ndarray, want_cache: bool = False):
        if x.ndim == 2:
            x = x[None]
        if x.shape[1:] != self.in_shape:
            raise ConfigurationError(
                f"sensing input must be (B, {self.la}, {2 * self.n}), got {x.shape}")
        a, xp = conv3x3_forward(x, params["conv.k"], params["conv.b"][0])
        r = np.maximum(a, 0.0)
        p, idx = maxpool_forward(r)
        flat = p.reshape(x.shape[0], -1)
        a2 = flat @ params["out.w"].T + params["out.b"]
        out = _act(a2, "sigmoid")
        if not want_cache:
            return out
        return out, {"x_shape": x.shape, "xp": xp, "a": a, "idx": idx,
                     "flat": flat, "a2": a2, "out": out}

    def backward(self, params: dict, cache: dict, dout: np.ndarray) -> dict:
        da2 = dout * _act_grad(cache["a2"], cache["out"], "sigmoid")
        dw_out = da2.T @ cache["flat"]
        db_out = da2.sum(axis=0)
        dflat = da2 @ params["out.w"]
        dp = dflat.reshape(cache["x_shape"][0], *pool_out_shape(*self.in_shape))
        dr = maxpool_backward(dp, cache["idx"], cache["x_shape"])
        da = dr * (cache["a"] > 0.0)
        dk, db, _ = conv3x3_backward(da, cache["xp"], params["conv.k"])
        return {"conv.k": dk, "conv.b": np.array([db]),
                "out.w": dw_out, "out.b": db_out}


class Mlp:
    """One-hidden-layer perceptron with configurable widths/activations."""

    def __init__(self, sizes: tuple[int, int, int], hidden_act: str):
        self.sizes = sizes
        self.hidden_act = hidden_act

    def init_params(self, rng: np.random.Generator) -> dict:
        n_in, n_hid, n_out = self.sizes
        return {
            "fc1.w": glorot(rng, n_hid, n_in),
            "fc1.b": np.zeros(n_hid),
            "fc2.w": glorot(rng, n_out, n_hid),
            "fc2.b": np.zeros(n_out),
        }

    def forward(self, params: dict, x: np.ndarray, want_cache: bool = False):
        if x.ndim == 1:
            x = x[None]
        if x.shape[1] != self.sizes[0]:
            raise ConfigurationError(
                f"expected input width {self.sizes[0]}, got {x.shape[1]}")
        a1 = x @ params["fc1.w"].T + params["fc1.b"]
        h = _act(a1, self.hidden_act)
        out = h @ params["fc2.w"].T + params["fc2.b"]
        if not want_cache:
            return out
        return out, {"x": x, "a1": a1, "h": h}

    def backward(self, params: dict, cache: dict, dout: np.ndarray) -> dict:
        dw2 = dout.T @ cache["h"]
        db2 = dout.sum(axis=0)
        dh = dout @ params["fc2.w"]
        da1 = dh * _act_grad(cache["a1"], cache["h"], self.hidden_act)
        dw1 = da1.T @ cache["x"]
        db1 = da1.sum(axis=0)
        return {"fc1.w": dw1, "fc1.b": db1, "fc2.w": dw2, "fc2.b": db2}


def make_sennet(la: int, n: int) -> SensingNet:
    return SensingNet(la, n)


def make_aidnet(n: int) -> Mlp:
    return Mlp((2 * n, 4 * n, 2 * n), "lrelu")


def make_recnet(la: int, n: int) -> Mlp:
    return Mlp((2 * n, 4 * la * n, 2 * la * n), "tanh")


# ---------------------------------------------------------------------------
# loss, optimizer, training loop

def mse_loss(pred: np.ndarray, target: np.ndarray):
    """Mean squared error over every element; returns (loss, dloss/dpred)."""
    diff = pred - target
    return float(np.mean(diff * diff)), (2.0 / diff.size) * diff


def loss_and_grads(net, params: dict, x: np.ndarray, y: np.ndarray):
    out, cache = net.forward(params, x, want_cache=True)
    loss, dout = mse_loss(out, y)
    return loss, net.backward(params, cache, dout)


@dataclass
class Adam:
    """Adam with bias correction; a zero gradient leaves parameters fixed."""

    cfg: AdamConfig = field(default_factory=AdamConfig)
    step_count: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)

    def step(self, params: dict, grads: dict) -> None:
        c = self.cfg
        self.step_count += 1
        t = self.step_count
        for k, g in grads.items():
            if k not in self.m:
                self.m[k] = np.zeros_like(params[k])
                self.v[k] = np.zeros_like(params[k])
            self.m[k] = c.beta1 * self.m[k] + (1.0 - c.beta1) * g
            self.v[k] = c.beta2 * self.v[k] + (1.0 - c.beta2) * (g * g)
            m_hat = self.m[k] / (1.0 - c.beta1 ** t)
            v_hat = self.v[k] / (1.0 - c.beta2 ** t)
            params[k] -= c.lr * m_hat / (np.sqrt(v_hat) + c.eps)


@dataclass
class TrainResult:
    params: dict            # weights after the last epoch
    best_params: dict       # weights at the best validation loss
    history: list           # (epoch, train_mse, val_mse, wall_seconds)
    best_epoch: int


def predict_batched(net, params: dict, x: np.ndarray, batch: int = 1024):
    outs = [net.forward(params, x[i:i + batch]) for i in range(0, len(x), batch)]
    return np.concatenate(outs, axis=0)


def eval_mse(net, params: dict, x: np.ndarray, y: np.ndarray, batch: int = 1024) -> float:
    total = 0.0
    for i in range(0, len(x), batch):
        out = net.forward(params, x[i:i + batch])
        total += float(np.sum((out - y[i:i + batch]) ** 2))
    return total / y.size


def train(net, params: dict, x: np.ndarray, y: np.ndarray,
          x_val: np.ndarray, y_val: np.ndarray, *, epochs: int,
          batch_size: int, adam_cfg: AdamConfig, rng: np.random.Generator,
          log=None) -> TrainResult:
    """Mini-batch Adam on MSE with per-epoch shuffling and validation.

    Aborts with :class:`TrainingDivergedError` on a non-finite loss.  Both
    the final weights and the best-validation weights are returned.
    """
    if len(x) == 0:
        raise ConfigurationError("training set is empty")
    opt = Adam(cfg=adam_cfg)
    history = []
    best_val = math.inf
    best_epoch = -1
    best_params = {k: p.copy() for k, p in params.items()}
    t0 = time.perf_counter()
    for epoch in range(epochs):
        perm = rng.permutation(len(x))
        loss_sum, seen = 0.0, 0
        for lo in range(0, len(x), batch_size):
            sel = perm[lo:lo + batch_size]
            loss, grads = loss_and_grads(net, params, x[sel], y[sel])
            if not math.isfinite(loss):
                raise TrainingDivergedError(
                    f"non-finite loss {loss} at epoch {epoch}, sample offset {lo}")
            opt.step(params, grads)
            loss_sum += loss * len(sel)
            seen += len(sel)
        train_mse = loss_sum / seen
        val_mse = eval_mse(net, params, x_val, y_val) if len(x_val) else math.nan
        if len(x_val) and val_mse < best_val:
            best_val = val_mse
            best_epoch = epoch
            best_params = {k: p.copy() for k, p in params.items()}
        history.append((epoch, train_mse, val_mse, time.perf_counter() - t0))
        if log is not None:
            log(epoch, train_mse, val_mse, time.perf_counter() - t0)
    if best_epoch < 0:
        best_params = {k: p.copy() for k, p in params.items()}
    return TrainResult(params=params, best_params=best_params,
                       history=history, best_epoch=best_epoch)


def write_history_csv(path, history) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("epoch,train_mse,val_mse,wall_seconds\n")
        for epoch, tr, va, sec in history:
            fh.write(f"{epoch},{tr:.10e},{va:.10e},{sec:.3f}\n")


def hard_decision(o: float) -> int:
    """Threshold the sensing output at 0.5; the tie maps to 0."""
    return int(o > 0.5)
