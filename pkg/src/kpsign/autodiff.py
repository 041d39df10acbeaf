"""Minimal reverse-mode automatic differentiation over numpy arrays.

Operations record a tape of parent links and local backward closures
while gradients are enabled; ``backward`` walks the tape in reverse
topological order and accumulates a gradient array per input.  Only the
operations the sequence classifier needs are implemented.
"""

from __future__ import annotations

from contextlib import contextmanager
from typing import Iterable, Optional, Sequence, Tuple

import numpy as np

_GRAD_ENABLED = True


@contextmanager
def no_grad():
    """Disable tape recording inside the block (inference mode)."""
    global _GRAD_ENABLED
    prev = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


def grad_enabled() -> bool:
    return _GRAD_ENABLED


class Tensor:
    """An array plus an optional gradient slot and tape links."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64) if not isinstance(data, np.ndarray) else data
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = requires_grad
        self._parents: Tuple["Tensor", ...] = ()
        self._backward = None

    @property
    def shape(self):
        return self.data.shape

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    # Convenience operators; all defer to the module-level ops.
    def __add__(self, other):
        return add(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __matmul__(self, other):
        return matmul(self, other)


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float64))


def _make(data: np.ndarray, parents: Sequence[Tensor], backward_fn) -> Tensor:
    track = _GRAD_ENABLED and any(p.requires_grad for p in parents)
    out = Tensor(data, requires_grad=track)
    if track:
        out._parents = tuple(parents)
        out._backward = backward_fn
    return out


def _accumulate(t: Tensor, g: np.ndarray):
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = g.copy() if isinstance(g, np.ndarray) else np.asarray(g, dtype=np.float64)
    else:
        t.grad = t.grad + g


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Sum a gradient down to the shape the operand was broadcast from."""
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    out_data = a.data + b.data

    def backward_fn(g):
        _accumulate(a, _unbroadcast(g, a.data.shape))
        _accumulate(b, _unbroadcast(g, b.data.shape))

    return _make(out_data, (a, b), backward_fn)


def mul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    out_data = a.data * b.data

    def backward_fn(g):
        _accumulate(a, _unbroadcast(g * b.data, a.data.shape))
        _accumulate(b, _unbroadcast(g * a.data, b.data.shape))

    return _make(out_data, (a, b), backward_fn)


def mul_scalar(a: Tensor, s: float) -> Tensor:
    """Multiply by a python scalar without touching the array dtype."""
    a = _as_tensor(a)

    def backward_fn(g):
        _accumulate(a, g * s)

    return _make(a.data * s, (a,), backward_fn)


def matmul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    out_data = a.data @ b.data

    def backward_fn(g):
        if a.requires_grad:
            ga = g @ np.swapaxes(b.data, -1, -2)
            _accumulate(a, _unbroadcast(ga, a.data.shape))
        if b.requires_grad:
            gb = np.swapaxes(a.data, -1, -2) @ g
            _accumulate(b, _unbroadcast(gb, b.data.shape))

    return _make(out_data, (a, b), backward_fn)


def reshape(a: Tensor, shape) -> Tensor:
    a = _as_tensor(a)
    in_shape = a.data.shape

    def backward_fn(g):
        _accumulate(a, g.reshape(in_shape))

    return _make(a.data.reshape(shape), (a,), backward_fn)


def transpose(a: Tensor, axes) -> Tensor:
    a = _as_tensor(a)
    axes = tuple(axes)
    inverse = tuple(np.argsort(axes))

    def backward_fn(g):
        _accumulate(a, g.transpose(inverse))

    return _make(a.data.transpose(axes), (a,), backward_fn)


def relu(a: Tensor) -> Tensor:
    a = _as_tensor(a)
    mask = a.data > 0

    def backward_fn(g):
        _accumulate(a, g * mask)

    return _make(a.data * mask, (a,), backward_fn)


def softmax(a: Tensor, axis: int = -1) -> Tensor:
    a = _as_tensor(a)
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out_data = e / e.sum(axis=axis, keepdims=True)

    def backward_fn(g):
        dot = (g * out_data).sum(axis=axis, keepdims=True)
        _accumulate(a, out_data * (g - dot))

    return _make(out_data, (a,), backward_fn)


def mean(a: Tensor, axis: int) -> Tensor:
    a = _as_tensor(a)
    n = a.data.shape[axis]
    out_data = a.data.mean(axis=axis)

    def backward_fn(g):
        _accumulate(a, np.expand_dims(g, axis) * np.ones_like(a.data) / n)

    return _make(out_data, (a,), backward_fn)


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize the last axis to zero mean / unit variance, then apply
    the learned per-feature scale and bias."""
    x, gain, bias = _as_tensor(x), _as_tensor(gain), _as_tensor(bias)
    mu = x.data.mean(axis=-1, keepdims=True)
    var = x.data.var(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mu) * inv
    out_data = xhat * gain.data + bias.data

    def backward_fn(g):
        if gain.requires_grad:
            _accumulate(gain, _unbroadcast(g * xhat, gain.data.shape))
        if bias.requires_grad:
            _accumulate(bias, _unbroadcast(g, bias.data.shape))
        if x.requires_grad:
            gx_hat = g * gain.data
            m1 = gx_hat.mean(axis=-1, keepdims=True)
            m2 = (gx_hat * xhat).mean(axis=-1, keepdims=True)
            _accumulate(x, inv * (gx_hat - m1 - xhat * m2))

    return _make(out_data, (x, gain, bias), backward_fn)


def dropout(a: Tensor, p: float, rng: np.random.Generator) -> Tensor:
    """Inverted dropout; identity when p == 0."""
    if p == 0.0:
        return a
    a = _as_tensor(a)
    keep = (rng.random(a.data.shape) >= p) / (1.0 - p)

    def backward_fn(g):
        _accumulate(a, g * keep)

    return _make(a.data * keep, (a,), backward_fn)


def cross_entropy_mean(logits: Tensor, labels: np.ndarray) -> Tensor:
    """Mean negative log softmax probability of the true classes.

    ``logits`` is (B, V); ``labels`` is a (B,) integer array.
    """
    logits = _as_tensor(logits)
    labels = np.asarray(labels, dtype=np.int64)
    z = logits.data
    m = z.max(axis=-1, keepdims=True)
    lse = m + np.log(np.exp(z - m).sum(axis=-1, keepdims=True))
    rows = np.arange(z.shape[0])
    losses = lse[:, 0] - z[rows, labels]
    out_data = np.asarray(losses.mean())

    def backward_fn(g):
        p = np.exp(z - lse)
        p[rows, labels] -= 1.0
        _accumulate(logits, g * p / z.shape[0])

    return _make(out_data, (logits,), backward_fn)


def _topo_order(root: Tensor):
    order = []
    visited = set()
    stack = [(root, False)]
    while stack:
        node, processed = stack.pop()
        if processed:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in visited:
                stack.append((p, False))
    return order


def backward(root: Tensor, grad: Optional[np.ndarray] = None):
    """Populate ``.grad`` on every tensor the root depends on."""
    if not root.requires_grad:
        raise ValueError("root of backward() does not require gradients")
    root.grad = np.ones_like(root.data) if grad is None else np.asarray(grad, dtype=root.data.dtype)
    for node in reversed(_topo_order(root)):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)


def zero_grads(tensors: Iterable[Tensor]):
    for t in tensors:
        t.grad = None
