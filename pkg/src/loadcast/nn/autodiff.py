"""Minimal reverse-mode automatic differentiation over numpy arrays.

A Tensor wraps a float64 ndarray plus an optional node in the backward tape.
Ops build the tape only while gradients are enabled; inference runs the same
code under `no_grad()` with zero tape overhead. All math is 64-bit.
"""

from __future__ import annotations

import contextlib
from typing import Callable

import numpy as np

from ..errors import ConfigError, ShapeError

_GRAD_ENABLED = True


@contextlib.contextmanager
def no_grad():
    """Disable tape construction inside the block (inference / finite differences)."""
    global _GRAD_ENABLED
    previous = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = previous


def grad_enabled() -> bool:
    return _GRAD_ENABLED


class Tensor:
    """An ndarray value with an optional gradient and backward closure."""

    __slots__ = ("value", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, value, requires_grad: bool = False, grad_buffer: np.ndarray | None = None):
        self.value = np.asarray(value, dtype=np.float64)
        self.requires_grad = requires_grad and _GRAD_ENABLED
        self.grad = grad_buffer  # leaves may share an external accumulation buffer
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable[[np.ndarray], None] | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    @property
    def rows(self) -> int:
        return int(self.value.shape[-2])

    @property
    def cols(self) -> int:
        return int(self.value.shape[-1])

    def _ensure_grad(self) -> np.ndarray:
        if self.grad is None:
            self.grad = np.zeros_like(self.value)
        return self.grad

    def backward(self) -> None:
        """Reverse-accumulate d(self)/d(leaf) for every reachable leaf.

        self must be scalar-valued (size 1).
        """
        if self.value.size != 1:
            raise ShapeError("backward() requires a scalar output")
        # Iterative topological sort; LSTM tapes are deep enough to overflow
        # Python's recursion limit otherwise.
        order: list[Tensor] = []
        visited: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                order.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if id(parent) not in visited:
                    stack.append((parent, False))
        self._ensure_grad()
        self.grad += np.ones_like(self.value)
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    # Operator sugar for the handful of infix uses in model code.
    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __matmul__(self, other):
        return matmul(self, other)

    def __neg__(self):
        return scale(self, -1.0)


def astensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum `grad` down to `shape`, undoing numpy broadcasting."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, (g, s) in enumerate(zip(grad.shape, shape)) if s == 1 and g != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def _make(value: np.ndarray, parents: tuple[Tensor, ...], backward) -> Tensor:
    out = Tensor(value)
    if _GRAD_ENABLED and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(p for p in parents if p.requires_grad)
        out._backward = backward
    return out


def _accumulate(tensor: Tensor, grad: np.ndarray) -> None:
    if tensor.requires_grad:
        tensor._ensure_grad()
        tensor.grad += _unbroadcast(grad, tensor.value.shape)


def add(a, b) -> Tensor:
    a, b = astensor(a), astensor(b)
    value = a.value + b.value

    def backward(g):
        _accumulate(a, g)
        _accumulate(b, g)

    return _make(value, (a, b), backward)


def sub(a, b) -> Tensor:
    a, b = astensor(a), astensor(b)
    value = a.value - b.value

    def backward(g):
        _accumulate(a, g)
        _accumulate(b, -g)

    return _make(value, (a, b), backward)


def mul(a, b) -> Tensor:
    a, b = astensor(a), astensor(b)
    value = a.value * b.value

    def backward(g):
        _accumulate(a, g * b.value)
        _accumulate(b, g * a.value)

    return _make(value, (a, b), backward)


def scale(a, factor: float) -> Tensor:
    a = astensor(a)
    value = a.value * factor

    def backward(g):
        _accumulate(a, g * factor)

    return _make(value, (a,), backward)


def matmul(a, b) -> Tensor:
    a, b = astensor(a), astensor(b)
    value = a.value @ b.value

    def backward(g):
        _accumulate(a, g @ np.swapaxes(b.value, -1, -2))
        _accumulate(b, np.swapaxes(a.value, -1, -2) @ g)

    return _make(value, (a, b), backward)


def relu(a) -> Tensor:
    a = astensor(a)
    value = np.maximum(a.value, 0.0)

    def backward(g):
        _accumulate(a, g * (a.value > 0.0))

    return _make(value, (a,), backward)


def sigmoid(a) -> Tensor:
    a = astensor(a)
    # Split by sign for numerical stability on large |x|.
    x = a.value
    value = np.where(x >= 0, 1.0 / (1.0 + np.exp(-np.abs(x))), np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))

    def backward(g):
        _accumulate(a, g * value * (1.0 - value))

    return _make(value, (a,), backward)


def tanh(a) -> Tensor:
    a = astensor(a)
    value = np.tanh(a.value)

    def backward(g):
        _accumulate(a, g * (1.0 - value * value))

    return _make(value, (a,), backward)


def exp(a) -> Tensor:
    a = astensor(a)
    value = np.exp(a.value)

    def backward(g):
        _accumulate(a, g * value)

    return _make(value, (a,), backward)


def log(a) -> Tensor:
    a = astensor(a)
    value = np.log(a.value)

    def backward(g):
        _accumulate(a, g / a.value)

    return _make(value, (a,), backward)


def tsum(a, axis=None, keepdims: bool = False) -> Tensor:
    a = astensor(a)
    value = a.value.sum(axis=axis, keepdims=keepdims)

    def backward(g):
        if axis is None:
            _accumulate(a, np.broadcast_to(g, a.value.shape).copy())
        else:
            gg = g if keepdims else np.expand_dims(g, axis)
            _accumulate(a, np.broadcast_to(gg, a.value.shape).copy())

    return _make(value, (a,), backward)


def mean(a, axis=None, keepdims: bool = False) -> Tensor:
    a = astensor(a)
    count = a.value.size if axis is None else a.value.shape[axis]
    return scale(tsum(a, axis=axis, keepdims=keepdims), 1.0 / count)


def reshape(a, shape) -> Tensor:
    a = astensor(a)
    value = a.value.reshape(shape)

    def backward(g):
        _accumulate(a, g.reshape(a.value.shape))

    return _make(value, (a,), backward)


def transpose(a, axes) -> Tensor:
    a = astensor(a)
    axes = tuple(axes)
    value = a.value.transpose(axes)
    inverse = tuple(np.argsort(axes))

    def backward(g):
        _accumulate(a, g.transpose(inverse))

    return _make(value, (a,), backward)


def concat(tensors, axis: int = -1) -> Tensor:
    tensors = [astensor(t) for t in tensors]
    value = np.concatenate([t.value for t in tensors], axis=axis)
    sizes = [t.value.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def backward(g):
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            index = [slice(None)] * g.ndim
            index[axis] = slice(lo, hi)
            _accumulate(t, g[tuple(index)])

    return _make(value, tuple(tensors), backward)


def softmax(a, mask: np.ndarray | None = None) -> Tensor:
    """Row-wise softmax over the last axis; masked-out entries get zero weight.

    `mask` is a boolean array broadcastable to a.shape with True = attend.
    """
    a = astensor(a)
    logits = a.value
    if mask is not None:
        logits = np.where(mask, logits, -np.inf)
    m = np.max(logits, axis=-1, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)  # fully masked rows stay all-zero
    e = np.exp(logits - m)
    denom = e.sum(axis=-1, keepdims=True)
    denom = np.where(denom == 0.0, 1.0, denom)
    value = e / denom

    def backward(g):
        inner = (g * value).sum(axis=-1, keepdims=True)
        _accumulate(a, value * (g - inner))

    return _make(value, (a,), backward)


def layer_norm(x, gamma, beta, epsilon: float = 1e-5) -> Tensor:
    """Normalize over the last axis with population variance, then scale/shift."""
    if epsilon <= 0:
        raise ConfigError("layer_norm epsilon must be positive")
    x, gamma, beta = astensor(x), astensor(gamma), astensor(beta)
    if gamma.value.shape[-1] != x.value.shape[-1] or beta.value.shape[-1] != x.value.shape[-1]:
        raise ShapeError("gamma/beta must match the normalized axis length")
    n = x.value.shape[-1]
    mu = x.value.mean(axis=-1, keepdims=True)
    var = ((x.value - mu) ** 2).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + epsilon)
    xhat = (x.value - mu) * inv
    value = gamma.value * xhat + beta.value

    def backward(g):
        _accumulate(gamma, g * xhat)
        _accumulate(beta, g)
        dxhat = g * gamma.value
        s1 = dxhat.sum(axis=-1, keepdims=True)
        s2 = (dxhat * xhat).sum(axis=-1, keepdims=True)
        _accumulate(x, (inv / n) * (n * dxhat - s1 - xhat * s2))

    return _make(value, (x, gamma, beta), backward)


def conv1d_same(x, weights, bias, causal: bool = False) -> Tensor:
    """1-D convolution along the time axis, zero-padded to preserve length.

    x: (..., T, Cin); weights: (K, Cin, Cout) with odd K; bias: broadcastable
    to (Cout,). Output: (..., T, Cout). Centered windows by default; with
    causal=True all padding goes on the left so position t sees only <= t.
    """
    x, weights, bias = astensor(x), astensor(weights), astensor(bias)
    k, cin, cout = weights.value.shape
    if k % 2 == 0:
        raise ConfigError(f"convolution kernel width must be odd, got {k}")
    if x.value.shape[-1] != cin:
        raise ShapeError(f"input channels {x.value.shape[-1]} != kernel channels {cin}")
    t = x.value.shape[-2]
    left = k - 1 if causal else k // 2
    right = k - 1 - left
    pad_spec = [(0, 0)] * (x.value.ndim - 2) + [(left, right), (0, 0)]
    xpad = np.pad(x.value, pad_spec)
    # (..., T, Cin, K) windows over the padded time axis
    xw = np.lib.stride_tricks.sliding_window_view(xpad, k, axis=-2)
    value = np.einsum("...tck,kcd->...td", xw, weights.value) + bias.value

    def backward(g):
        xw_flat = xw.reshape(-1, cin, k)
        g_flat = g.reshape(-1, cout)
        _accumulate(weights, np.einsum("mck,md->kcd", xw_flat, g_flat))
        _accumulate(bias, g)
        dxpad = np.zeros_like(xpad)
        for j in range(k):
            dxpad[..., j : j + t, :] += g @ weights.value[j].T
        _accumulate(x, dxpad[..., left : left + t, :])

    return _make(value, (x, weights, bias), backward)


def maxpool1d_same(x, pool_range: int, causal: bool = False) -> Tensor:
    """Sliding max over the time axis, stride 1, length-preserving.

    Edge windows shrink to whatever lies inside the sequence. With
    causal=True the window at position t covers [t - pool_range + 1, t].
    """
    x = astensor(x)
    if pool_range % 2 == 0 or pool_range < 1:
        raise ConfigError(f"pool range must be odd and positive, got {pool_range}")
    if pool_range == 1:
        return x
    t = x.value.shape[-2]
    left = pool_range - 1 if causal else pool_range // 2
    right = pool_range - 1 - left
    pad_spec = [(0, 0)] * (x.value.ndim - 2) + [(left, right), (0, 0)]
    xpad = np.pad(x.value, pad_spec, constant_values=-np.inf)
    xw = np.lib.stride_tricks.sliding_window_view(xpad, pool_range, axis=-2)
    arg = xw.argmax(axis=-1)
    value = np.take_along_axis(xw, arg[..., None], axis=-1)[..., 0]

    def backward(g):
        dxpad = np.zeros_like(xpad)
        for j in range(pool_range):
            dxpad[..., j : j + t, :] += g * (arg == j)
        _accumulate(x, dxpad[..., left : left + t, :])

    return _make(value, (x,), backward)


def mse(prediction, target) -> Tensor:
    """Mean squared error against a constant target."""
    prediction = astensor(prediction)
    target = np.asarray(target, dtype=np.float64)
    if prediction.value.shape != target.shape:
        raise ShapeError(f"prediction {prediction.value.shape} vs target {target.shape}")
    diff = sub(prediction, Tensor(target))
    return mean(mul(diff, diff))
