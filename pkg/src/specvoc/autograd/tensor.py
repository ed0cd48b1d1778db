"""Reverse-mode automatic differentiation over dense numpy arrays.

Graphs are built eagerly: every operation returns a new Tensor holding a
closure that, given the output gradient, accumulates into its parents.
``backward()`` runs the closures once each in reverse topological order.
Gradients accumulate across calls until ``zero_grad``.

Dtype policy: float64 is the verification mode (finite-difference checks
assume it), float32 the training mode. Scalars and plain arrays entering
an op are cast to the tensor operand's dtype; mixing two tensors of
different dtypes is an error.
"""

from __future__ import annotations

from contextlib import contextmanager
from dataclasses import dataclass

import numpy as np
from scipy.special import erf

_grad_enabled = True


@contextmanager
def no_grad():
    """Disable graph construction (inference / detached discriminator passes)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad=False, _parents=(), _backward=None):
        self.data = np.asarray(data)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = _parents
        self._backward = _backward

    # -- bookkeeping ------------------------------------------------------
    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def zero_grad(self):
        self.grad = None

    def _accumulate(self, g):
        if not self.requires_grad and self._backward is None:
            return  # constant leaf; nothing upstream wants this gradient
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def backward(self):
        """Accumulate d(self)/d(leaf) into every reachable tensor's .grad."""
        if self.data.ndim != 0:
            raise ValueError(f"backward requires a scalar loss, got shape {self.shape}")
        topo = []
        visited = set()
        stack = [(self, False)]
        while stack:  # iterative DFS; graphs are deep at audio lengths
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in visited:
                    stack.append((p, False))
        self._accumulate(np.ones_like(self.data))
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, dtype={self.dtype}, grad={'set' if self.grad is not None else 'none'})"

    # -- operator sugar ---------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, key):
        return take(self, key)

    def sum(self, axis=None, keepdims=False):
        return sum_(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return mean(self, axis, keepdims)

    def reshape(self, *shape):
        return reshape(self, shape if len(shape) != 1 else shape[0])

    def swapaxes(self, a, b):
        return swapaxes(self, a, b)


@dataclass
class Parameter:
    """Named trainable tensor; names are unique within a model."""

    name: str
    tensor: Tensor
    trainable: bool = True


def _lift(x, like: Tensor) -> Tensor:
    if isinstance(x, Tensor):
        if x.dtype != like.dtype:
            raise ValueError(f"mixed dtypes in op: {x.dtype} vs {like.dtype}")
        return x
    return Tensor(np.asarray(x, dtype=like.dtype))


def _node(data, parents, backward) -> Tensor:
    """Create an op result; builds the graph only when a parent needs it."""
    if _grad_enabled and any(p.requires_grad or p._parents for p in parents):
        return Tensor(data, _parents=tuple(parents), _backward=backward)
    return Tensor(data)


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    """Reduce a gradient back to the (right-aligned) broadcast operand shape."""
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    squeeze = tuple(i for i, d in enumerate(shape) if d == 1 and g.shape[i] != 1)
    if squeeze:
        g = g.sum(axis=squeeze, keepdims=True)
    return g


# -----------------------------
# Binary elementwise
# -----------------------------
def add(a, b):
    a, b = _coerce(a, b)

    def backward(g):
        a._accumulate(_unbroadcast(g, a.shape))
        b._accumulate(_unbroadcast(g, b.shape))

    return _node(a.data + b.data, (a, b), backward)


def sub(a, b):
    a, b = _coerce(a, b)

    def backward(g):
        a._accumulate(_unbroadcast(g, a.shape))
        b._accumulate(_unbroadcast(-g, b.shape))

    return _node(a.data - b.data, (a, b), backward)


def mul(a, b):
    a, b = _coerce(a, b)

    def backward(g):
        a._accumulate(_unbroadcast(g * b.data, a.shape))
        b._accumulate(_unbroadcast(g * a.data, b.shape))

    return _node(a.data * b.data, (a, b), backward)


def div(a, b):
    a, b = _coerce(a, b)
    if b.dtype == np.float64 and np.any(b.data == 0.0):
        raise ValueError("division by a tensor containing zeros (flagged in 64-bit mode)")

    def backward(g):
        a._accumulate(_unbroadcast(g / b.data, a.shape))
        b._accumulate(_unbroadcast(-g * a.data / (b.data * b.data), b.shape))

    return _node(a.data / b.data, (a, b), backward)


def _coerce(a, b):
    if isinstance(a, Tensor):
        return a, _lift(b, a)
    if isinstance(b, Tensor):
        return _lift(a, b), b
    raise TypeError("at least one operand must be a Tensor")


# -----------------------------
# Unary elementwise
# -----------------------------
def exp(a: Tensor):
    out = np.exp(a.data)

    def backward(g):
        a._accumulate(g * out)

    return _node(out, (a,), backward)


def log(a: Tensor):
    def backward(g):
        a._accumulate(g / a.data)

    return _node(np.log(a.data), (a,), backward)


def sqrt(a: Tensor):
    out = np.sqrt(a.data)

    def backward(g):
        a._accumulate(g * (0.5 / out))

    return _node(out, (a,), backward)


def sin(a: Tensor):
    def backward(g):
        a._accumulate(g * np.cos(a.data))

    return _node(np.sin(a.data), (a,), backward)


def cos(a: Tensor):
    def backward(g):
        a._accumulate(-g * np.sin(a.data))

    return _node(np.cos(a.data), (a,), backward)


def tanh(a: Tensor):
    out = np.tanh(a.data)

    def backward(g):
        a._accumulate(g * (1.0 - out * out))

    return _node(out, (a,), backward)


_INV_SQRT2 = 1.0 / np.sqrt(2.0)
_INV_SQRT2PI = 1.0 / np.sqrt(2.0 * np.pi)


def gelu(a: Tensor):
    """Exact Gaussian-CDF GELU: x * Phi(x). Exactness keeps gradchecks tight."""
    x = a.data
    phi_cdf = 0.5 * (1.0 + erf(x * _INV_SQRT2))

    def backward(g):
        pdf = np.exp(-0.5 * x * x) * _INV_SQRT2PI
        a._accumulate(g * (phi_cdf + x * pdf).astype(x.dtype))

    return _node((x * phi_cdf).astype(x.dtype), (a,), backward)


def relu(a: Tensor):
    def backward(g):
        a._accumulate(g * (a.data > 0))

    return _node(np.maximum(a.data, 0), (a,), backward)


def leaky_relu(a: Tensor, slope=0.1):
    def backward(g):
        a._accumulate(g * np.where(a.data > 0, 1.0, slope).astype(a.dtype))

    return _node(np.where(a.data > 0, a.data, a.data * slope).astype(a.dtype), (a,), backward)


def abs_(a: Tensor):
    def backward(g):
        a._accumulate(g * np.sign(a.data))

    return _node(np.abs(a.data), (a,), backward)


def clamp(a: Tensor, lo=None, hi=None):
    """Clip to [lo, hi]; gradient passes only through unclipped entries."""
    out = np.clip(a.data, lo, hi)

    def backward(g):
        mask = np.ones_like(a.data)
        if lo is not None:
            mask *= a.data >= lo
        if hi is not None:
            mask *= a.data <= hi
        a._accumulate(g * mask)

    return _node(out, (a,), backward)


# -----------------------------
# Reductions
# -----------------------------
def sum_(a: Tensor, axis=None, keepdims=False):
    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        a._accumulate(np.broadcast_to(g, a.shape).copy())

    return _node(a.data.sum(axis=axis, keepdims=keepdims), (a,), backward)


def mean(a: Tensor, axis=None, keepdims=False):
    count = a.data.size if axis is None else np.prod(
        [a.shape[ax] for ax in (axis if isinstance(axis, tuple) else (axis,))]
    )

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        a._accumulate(np.broadcast_to(g, a.shape) / count)

    return _node(a.data.mean(axis=axis, keepdims=keepdims), (a,), backward)


# -----------------------------
# Linear algebra
# -----------------------------
def matmul(a, b):
    a, b = _coerce(a, b)

    def backward(g):
        ga = g @ np.swapaxes(b.data, -1, -2)
        gb = np.swapaxes(a.data, -1, -2) @ g
        a._accumulate(_unbroadcast_matmul(ga, a.shape))
        b._accumulate(_unbroadcast_matmul(gb, b.shape))

    return _node(a.data @ b.data, (a, b), backward)


def _unbroadcast_matmul(g, shape):
    if g.ndim > len(shape):
        g = g.sum(axis=tuple(range(g.ndim - len(shape))))
    return g


# -----------------------------
# Shape ops
# -----------------------------
def reshape(a: Tensor, shape):
    orig = a.shape

    def backward(g):
        a._accumulate(g.reshape(orig))

    return _node(a.data.reshape(shape), (a,), backward)


def swapaxes(a: Tensor, ax1, ax2):
    def backward(g):
        a._accumulate(np.swapaxes(g, ax1, ax2))

    return _node(np.swapaxes(a.data, ax1, ax2), (a,), backward)


def take(a: Tensor, key):
    """Basic (slice/int) indexing; fancy indexing is not supported."""

    def backward(g):
        buf = np.zeros_like(a.data)
        buf[key] += g
        a._accumulate(buf)

    return _node(a.data[key], (a,), backward)


def concat(tensors, axis=0):
    tensors = list(tensors)
    sizes = [t.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def backward(g):
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            idx = [slice(None)] * g.ndim
            idx[axis] = slice(lo, hi)
            t._accumulate(g[tuple(idx)])

    return _node(np.concatenate([t.data for t in tensors], axis=axis), tensors, backward)


def pad(a: Tensor, pad_width):
    """Zero padding; pad_width as in np.pad."""
    widths = np.asarray(pad_width)
    if widths.ndim == 1:
        widths = np.broadcast_to(widths, (a.ndim, 2))

    def backward(g):
        idx = tuple(slice(lo, g.shape[i] - hi if hi else None) for i, (lo, hi) in enumerate(widths))
        a._accumulate(g[idx])

    return _node(np.pad(a.data, widths), (a,), backward)


def dilate(a: Tensor, step: int, axis=-1):
    """Insert step-1 zeros between consecutive entries along an axis."""
    if step == 1:
        return a
    ax = axis % a.ndim
    n = a.shape[ax]
    shape = list(a.shape)
    shape[ax] = (n - 1) * step + 1
    idx = [slice(None)] * a.ndim
    idx[ax] = slice(None, None, step)
    idx = tuple(idx)

    def backward(g):
        a._accumulate(g[idx])

    out = np.zeros(shape, dtype=a.dtype)
    out[idx] = a.data
    return _node(out, (a,), backward)


def reflect_pad_last(a: Tensor, padn: int):
    """Reflection padding along the last axis (no edge duplication)."""
    n = a.shape[-1]
    idx = np.pad(np.arange(n), padn, mode="reflect")

    def backward(g):
        g2 = g.reshape(-1, idx.size)
        buf = np.zeros((g2.shape[0], n), dtype=a.dtype)
        np.add.at(buf, (np.arange(g2.shape[0])[:, None], idx[None, :]), g2)
        a._accumulate(buf.reshape(a.shape))

    return _node(a.data[..., idx], (a,), backward)


def flip(a: Tensor, axis=-1):
    def backward(g):
        a._accumulate(np.flip(g, axis))

    return _node(np.flip(a.data, axis).copy(), (a,), backward)


# -----------------------------
# Composite layers
# -----------------------------
def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps=1e-6, axis=-2):
    """Normalize over one axis (default -2, the channel axis of [.., C, T])."""
    mu = mean(x, axis=axis, keepdims=True)
    centered = sub(x, mu)
    var = mean(mul(centered, centered), axis=axis, keepdims=True)
    inv = div(1.0, sqrt(add(var, eps)))
    return add(mul(mul(centered, inv), gamma), beta)
