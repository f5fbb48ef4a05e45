"""Minimal deterministic neural kernel: parameters, layers, loss, Adam.

Everything is float64 and batch-first. There is no general autograd:
each layer ships a forward that returns (output, cache) and a backward
that consumes (upstream gradient, cache), accumulates parameter
gradients in place, and returns the input gradient. Finite-difference
verification lives in :func:`grad_check`.
"""

from __future__ import annotations

import math
from typing import Callable, Sequence

import numpy as np

from .errors import TrainingDiverged

EPS_LOG = 1e-12


class Parameter:
    """A named tensor with a same-shape gradient slot."""

    __slots__ = ("value", "grad")

    def __init__(self, value: np.ndarray):
        self.value = np.array(value, dtype=np.float64)
        self.grad = np.zeros_like(self.value)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape


class ModelState:
    """Named parameters plus Adam moment slots and a step counter."""

    def __init__(self):
        self.params: dict[str, Parameter] = {}
        self.step: int = 0
        self._m: dict[str, np.ndarray] = {}
        self._v: dict[str, np.ndarray] = {}

    def add(self, name: str, value: np.ndarray) -> Parameter:
        if name in self.params:
            raise ValueError(f"parameter {name!r} already registered")
        p = Parameter(value)
        self.params[name] = p
        return p

    def __getitem__(self, name: str) -> Parameter:
        return self.params[name]

    def __contains__(self, name: str) -> bool:
        return name in self.params

    def names(self) -> list[str]:
        return list(self.params)

    def n_entries(self) -> int:
        return sum(p.value.size for p in self.params.values())

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.grad.fill(0.0)

    def adam_step(
        self, lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8
    ) -> None:
        """Bias-corrected Adam update over all registered parameters."""
        t = self.step + 1
        for name, p in self.params.items():
            g = p.grad
            if not np.all(np.isfinite(g)):
                raise TrainingDiverged(self.step, f"non-finite gradient in parameter {name!r}")
            m = self._m.setdefault(name, np.zeros_like(p.value))
            v = self._v.setdefault(name, np.zeros_like(p.value))
            m *= beta1
            m += (1.0 - beta1) * g
            v *= beta2
            v += (1.0 - beta2) * g * g
            m_hat = m / (1.0 - beta1**t)
            v_hat = v / (1.0 - beta2**t)
            p.value -= lr * m_hat / (np.sqrt(v_hat) + eps)
        self.step = t

    def copy(self) -> "ModelState":
        other = ModelState()
        for name, p in self.params.items():
            other.add(name, p.value.copy())
        other.step = self.step
        return other

    def load_values(self, other: "ModelState") -> None:
        for name, p in self.params.items():
            np.copyto(p.value, other.params[name].value)
        self.step = other.step

    def to_payload(self) -> dict:
        return {
            "step": self.step,
            "params": {
                name: {"shape": list(p.value.shape), "data": p.value.reshape(-1).tolist()}
                for name, p in self.params.items()
            },
        }

    @classmethod
    def from_payload(cls, payload: dict) -> "ModelState":
        state = cls()
        for name, entry in payload["params"].items():
            value = np.asarray(entry["data"], dtype=np.float64).reshape(entry["shape"])
            state.add(name, value)
        state.step = int(payload.get("step", 0))
        return state


def adam_step(state: ModelState, lr: float, beta1: float = 0.9, beta2: float = 0.999,
              eps: float = 1e-8) -> ModelState:
    state.adam_step(lr, beta1=beta1, beta2=beta2, eps=eps)
    return state


# ---------------------------------------------------------------------------
# initializers

def uniform_init(rng: np.random.Generator, shape: Sequence[int], fan_in: int) -> np.ndarray:
    scale = math.sqrt(1.0 / fan_in)
    return rng.uniform(-scale, scale, size=tuple(shape))


def add_dense(state: ModelState, prefix: str, d_in: int, d_out: int,
              rng: np.random.Generator) -> None:
    state.add(f"{prefix}.W", uniform_init(rng, (d_in, d_out), fan_in=d_in))
    state.add(f"{prefix}.b", np.zeros(d_out))


def add_lstm(state: ModelState, prefix: str, d_in: int, hidden: int,
             rng: np.random.Generator) -> None:
    # gate layout [i | f | g | o]; forget-gate bias starts at +1
    state.add(f"{prefix}.W", uniform_init(rng, (d_in + hidden, 4 * hidden), fan_in=d_in + hidden))
    b = np.zeros(4 * hidden)
    b[hidden : 2 * hidden] = 1.0
    state.add(f"{prefix}.b", b)


def add_bilstm(state: ModelState, prefix: str, d_in: int, hidden: int,
               rng: np.random.Generator) -> None:
    add_lstm(state, f"{prefix}.fwd", d_in, hidden, rng)
    add_lstm(state, f"{prefix}.bwd", d_in, hidden, rng)


def add_attention(state: ModelState, prefix: str, d: int, rng: np.random.Generator,
                  proj: int | None = None) -> None:
    a = proj if proj is not None else d
    state.add(f"{prefix}.W", uniform_init(rng, (d, a), fan_in=d))
    state.add(f"{prefix}.v", uniform_init(rng, (a,), fan_in=a))


# ---------------------------------------------------------------------------
# elementwise helpers

def sigmoid(x: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-np.clip(x, -500.0, 500.0)))


def softmax(x: np.ndarray, axis: int = -1) -> np.ndarray:
    shifted = x - np.max(x, axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / np.sum(e, axis=axis, keepdims=True)


# ---------------------------------------------------------------------------
# dense layer

def dense_forward(x: np.ndarray, W: Parameter, b: Parameter, activation: str = "none"):
    """y = act(x W + b) for act in {none, relu, softmax}; x is (B, d) or (d,)."""
    if activation not in ("none", "relu", "softmax"):
        raise ValueError(f"unknown activation {activation!r}")
    squeeze = x.ndim == 1
    x2 = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if x2.shape[1] != W.value.shape[0]:
        raise ValueError(f"shape mismatch: input {x2.shape} vs W {W.value.shape}")
    z = x2 @ W.value + b.value
    if activation == "relu":
        y = np.maximum(z, 0.0)
    elif activation == "softmax":
        y = softmax(z, axis=1)
    else:
        y = z
    cache = (x2, z, y, W, b, activation, squeeze)
    return (y[0] if squeeze else y), cache


def dense_backward(dy: np.ndarray, cache) -> np.ndarray:
    x2, z, y, W, b, activation, squeeze = cache
    dy2 = np.atleast_2d(np.asarray(dy, dtype=np.float64))
    if activation == "relu":
        dz = dy2 * (z > 0.0)
    elif activation == "softmax":
        dz = y * (dy2 - np.sum(dy2 * y, axis=1, keepdims=True))
    else:
        dz = dy2
    W.grad += x2.T @ dz
    b.grad += dz.sum(axis=0)
    dx = dz @ W.value.T
    return dx[0] if squeeze else dx


# ---------------------------------------------------------------------------
# LSTM / BiLSTM

def lstm_cell(x: np.ndarray, h_prev: np.ndarray, c_prev: np.ndarray, W: Parameter, b: Parameter):
    """One step of the standard LSTM: sigmoid gates, tanh candidate."""
    hidden = h_prev.shape[-1]
    xh = np.concatenate([x, h_prev], axis=-1)
    z = xh @ W.value + b.value
    i = sigmoid(z[..., :hidden])
    f = sigmoid(z[..., hidden : 2 * hidden])
    g = np.tanh(z[..., 2 * hidden : 3 * hidden])
    o = sigmoid(z[..., 3 * hidden :])
    c = f * c_prev + i * g
    tc = np.tanh(c)
    h = o * tc
    cache = (xh, c_prev, i, f, g, o, tc)
    return h, c, cache


def lstm_cell_backward(dh: np.ndarray, dc: np.ndarray, cache, W: Parameter, b: Parameter):
    xh, c_prev, i, f, g, o, tc = cache
    hidden = i.shape[-1]
    d_in = xh.shape[-1] - hidden
    do = dh * tc
    dc_total = dc + dh * o * (1.0 - tc * tc)
    df = dc_total * c_prev
    di = dc_total * g
    dg = dc_total * i
    dc_prev = dc_total * f
    dz = np.concatenate(
        [
            di * i * (1.0 - i),
            df * f * (1.0 - f),
            dg * (1.0 - g * g),
            do * o * (1.0 - o),
        ],
        axis=-1,
    )
    W.grad += xh.T @ dz
    b.grad += dz.sum(axis=0)
    dxh = dz @ W.value.T
    return dxh[..., :d_in], dxh[..., d_in:], dc_prev


def lstm_forward(X: np.ndarray, W: Parameter, b: Parameter, reverse: bool = False):
    """Run an LSTM over X (B, T, d); output H (B, T, h) indexed by input position."""
    B, T, _ = X.shape
    if T == 0:
        raise ValueError("cannot run an LSTM over an empty sequence")
    hidden = b.value.shape[0] // 4
    H = np.zeros((B, T, hidden))
    h = np.zeros((B, hidden))
    c = np.zeros((B, hidden))
    caches = [None] * T
    order = range(T - 1, -1, -1) if reverse else range(T)
    for t in order:
        h, c, caches[t] = lstm_cell(X[:, t, :], h, c, W, b)
        H[:, t, :] = h
    return H, (caches, reverse, X.shape)


def lstm_backward(dH: np.ndarray, cache, W: Parameter, b: Parameter) -> np.ndarray:
    caches, reverse, x_shape = cache
    B, T, d = x_shape
    hidden = dH.shape[-1]
    dX = np.zeros((B, T, d))
    dh_carry = np.zeros((B, hidden))
    dc_carry = np.zeros((B, hidden))
    order = range(T) if reverse else range(T - 1, -1, -1)
    for t in order:
        dh = dH[:, t, :] + dh_carry
        dx, dh_carry, dc_carry = lstm_cell_backward(dh, dc_carry, caches[t], W, b)
        dX[:, t, :] = dx
    return dX


def bilstm_forward(X: np.ndarray, Wf: Parameter, bf: Parameter, Wb: Parameter, bb: Parameter):
    """Independent forward and reversed passes; per-step concatenation."""
    Hf, cache_f = lstm_forward(X, Wf, bf, reverse=False)
    Hb, cache_b = lstm_forward(X, Wb, bb, reverse=True)
    H = np.concatenate([Hf, Hb], axis=-1)
    return H, (cache_f, cache_b)


def bilstm_backward(dH: np.ndarray, cache, Wf: Parameter, bf: Parameter,
                    Wb: Parameter, bb: Parameter) -> np.ndarray:
    cache_f, cache_b = cache
    hidden = dH.shape[-1] // 2
    dX = lstm_backward(dH[..., :hidden], cache_f, Wf, bf)
    dX += lstm_backward(dH[..., hidden:], cache_b, Wb, bb)
    return dX


def bilstm_final(H: np.ndarray) -> np.ndarray:
    """Final states of both directions: fwd at the last step, bwd at the first."""
    hidden = H.shape[-1] // 2
    return np.concatenate([H[:, -1, :hidden], H[:, 0, hidden:]], axis=-1)


def bilstm_final_backward(dfinal: np.ndarray, seq_shape: tuple[int, int, int]) -> np.ndarray:
    B, T, two_h = seq_shape
    hidden = two_h // 2
    dH = np.zeros((B, T, two_h))
    dH[:, -1, :hidden] = dfinal[:, :hidden]
    dH[:, 0, hidden:] = dfinal[:, hidden:]
    return dH


# ---------------------------------------------------------------------------
# additive attention

def attention_forward(H: np.ndarray, W: Parameter, v: Parameter):
    """Scores v . tanh(h W) per step; softmax over steps; weighted sum of H."""
    U = np.tanh(H @ W.value)          # (B, T, a)
    s = U @ v.value                   # (B, T)
    alpha = softmax(s, axis=1)
    ctx = np.einsum("bt,btd->bd", alpha, H)
    cache = (H, U, alpha, W, v)
    return ctx, cache


def attention_backward(dctx: np.ndarray, cache) -> np.ndarray:
    H, U, alpha, W, v = cache
    dalpha = np.einsum("bd,btd->bt", dctx, H)
    dH = alpha[:, :, None] * dctx[:, None, :]
    ds = alpha * (dalpha - np.sum(dalpha * alpha, axis=1, keepdims=True))
    dU = ds[:, :, None] * v.value[None, None, :]
    dZ = dU * (1.0 - U * U)
    v.grad += np.einsum("bta,bt->a", U, ds)
    W.grad += np.einsum("btd,bta->da", H, dZ)
    dH += np.einsum("bta,da->btd", dZ, W.value)
    return dH


# ---------------------------------------------------------------------------
# loss

def weighted_cross_entropy(probs: np.ndarray, target: int, class_weights: np.ndarray,
                           eps: float = EPS_LOG) -> float:
    """-weight(target) * ln(probs[target] + eps) for a single distribution."""
    probs = np.asarray(probs, dtype=np.float64)
    if abs(float(probs.sum()) - 1.0) > 1e-6:
        raise ValueError(f"probabilities sum to {probs.sum()!r}, not 1")
    if not 0 <= target < probs.shape[0]:
        raise ValueError(f"target {target} out of range for {probs.shape[0]} classes")
    w = float(np.asarray(class_weights, dtype=np.float64)[target])
    return -w * math.log(float(probs[target]) + eps)


def batch_weighted_xent(probs: np.ndarray, targets: np.ndarray, class_weights: np.ndarray):
    """Mean weighted cross-entropy over a batch plus the logits gradient.

    ``probs`` must already be softmax outputs; the returned gradient is with
    respect to the pre-softmax logits (the usual fused form).
    """
    B = probs.shape[0]
    w = np.asarray(class_weights, dtype=np.float64)[targets]
    picked = probs[np.arange(B), targets]
    loss = float(np.mean(-w * np.log(picked + EPS_LOG)))
    dlogits = probs.copy()
    dlogits[np.arange(B), targets] -= 1.0
    dlogits *= (w / B)[:, None]
    return loss, dlogits


# ---------------------------------------------------------------------------
# finite-difference verification

def grad_check(loss_fn: Callable[[], float], state: ModelState, h: float = 1e-5,
               names: Sequence[str] | None = None) -> float:
    """Max relative error between analytic and central-difference gradients.

    ``loss_fn`` must run forward and backward, accumulating gradients into
    ``state``, and return the scalar loss.
    """
    state.zero_grad()
    loss_fn()
    selected = list(names) if names is not None else state.names()
    analytic = {name: state[name].grad.copy() for name in selected}
    worst = 0.0
    for name in selected:
        flat = state[name].value.reshape(-1)
        aflat = analytic[name].reshape(-1)
        for idx in range(flat.size):
            orig = flat[idx]
            flat[idx] = orig + h
            lp = loss_fn()
            flat[idx] = orig - h
            lm = loss_fn()
            flat[idx] = orig
            numeric = (lp - lm) / (2.0 * h)
            denom = max(abs(aflat[idx]), abs(numeric), 1e-6)
            worst = max(worst, abs(aflat[idx] - numeric) / denom)
    state.zero_grad()
    return worst
