"""Reverse-mode automatic differentiation over float64 numpy arrays.

A :class:`Tensor` records the operation that produced it. Calling
:func:`backward` on a scalar result walks the graph in reverse topological
order and accumulates ``d loss / d leaf`` into the ``grad`` of every leaf that
requires gradients. Matrix operations broadcast over leading batch axes the
way ``numpy.matmul`` does, so a batch of windows is one graph.
"""

from __future__ import annotations

import contextlib

import numpy as np

from . import _kernels
from .errors import ConfigError, DimensionError, UsageError

_mac_counter: list[int] | None = None


@contextlib.contextmanager
def count_macs():
    """Tally multiply-accumulates performed by matmul, conv and layer norm.

    Yields a one-element list whose entry is the running count.
    """
    global _mac_counter
    prev = _mac_counter
    _mac_counter = [0]
    try:
        yield _mac_counter
    finally:
        _mac_counter = prev


def _tally(n: int) -> None:
    if _mac_counter is not None:
        _mac_counter[0] += int(n)


class Tensor:
    __slots__ = ("value", "grad", "requires_grad", "_parents", "_backward", "name")

    def __init__(self, value, requires_grad: bool = False, name: str | None = None,
                 _parents: tuple = (), _backward=None):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad = np.zeros_like(self.value) if requires_grad and not _parents else None
        self.requires_grad = requires_grad
        self._parents = _parents
        self._backward = _backward
        self.name = name

    @property
    def shape(self):
        return self.value.shape

    @property
    def is_leaf(self) -> bool:
        return not self._parents

    def zero_grad(self) -> None:
        if self.requires_grad:
            self.grad = np.zeros_like(self.value)

    def backward(self) -> None:
        backward(self)

    def __repr__(self):
        label = f" {self.name!r}" if self.name else ""
        return f"Tensor{label}(shape={self.value.shape})"

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, neg(as_tensor(other)))

    def __rsub__(self, other):
        return add(as_tensor(other), neg(self))

    def __neg__(self):
        return neg(self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            raise TypeError("division by a Tensor is not supported")
        return mul(self, 1.0 / other)

    def __matmul__(self, other):
        return matmul(self, other)

    @property
    def T(self):
        return swap_last(self)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(value, parents, backward_fn) -> Tensor:
    parents = tuple(parents)
    if not any(p.requires_grad for p in parents):
        return Tensor(value)
    return Tensor(value, requires_grad=True, _parents=parents, _backward=backward_fn)


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum ``grad`` down to ``shape`` after numpy broadcasting."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


# ---------------------------------------------------------------------------
# elementwise


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    try:
        out = a.value + b.value
    except ValueError:
        raise DimensionError(f"cannot add shapes {a.shape} and {b.shape}") from None

    def _back(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return _make(out, (a, b), _back)


def neg(a: Tensor) -> Tensor:
    return _make(-a.value, (a,), lambda g: (-g,))


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    try:
        out = a.value * b.value
    except ValueError:
        raise DimensionError(f"cannot multiply shapes {a.shape} and {b.shape}") from None

    def _back(g):
        return _unbroadcast(g * b.value, a.shape), _unbroadcast(g * a.value, b.shape)

    return _make(out, (a, b), _back)


def relu(a: Tensor) -> Tensor:
    mask = a.value > 0
    return _make(np.where(mask, a.value, 0.0), (a,), lambda g: (g * mask,))


def absolute(a: Tensor) -> Tensor:
    sign = np.sign(a.value)
    return _make(np.abs(a.value), (a,), lambda g: (g * sign,))


def dropout(a: Tensor, rate: float, rng: np.random.Generator | None) -> Tensor:
    """Inverted dropout. A no-op when ``rate`` is 0 or ``rng`` is None."""
    if rate <= 0.0 or rng is None:
        return a
    if rate >= 1.0:
        raise ConfigError("dropout rate must be < 1")
    mask = (rng.random(a.shape) >= rate) / (1.0 - rate)
    return _make(a.value * mask, (a,), lambda g: (g * mask,))


# ---------------------------------------------------------------------------
# reductions and shape ops


def sum_all(a: Tensor) -> Tensor:
    return _make(np.array(a.value.sum()).reshape(1, 1), (a,),
                 lambda g: (np.broadcast_to(g.reshape(()), a.shape).copy(),))


def mean_all(a: Tensor) -> Tensor:
    n = a.value.size
    return _make(np.array(a.value.mean()).reshape(1, 1), (a,),
                 lambda g: (np.full(a.shape, g.reshape(()) / n),))


def reshape(a: Tensor, shape) -> Tensor:
    return _make(a.value.reshape(shape), (a,), lambda g: (g.reshape(a.shape),))


def transpose(a: Tensor, axes) -> Tensor:
    axes = tuple(axes)
    inverse = tuple(np.argsort(axes))
    return _make(a.value.transpose(axes), (a,), lambda g: (g.transpose(inverse),))


def swap_last(a: Tensor) -> Tensor:
    return _make(np.swapaxes(a.value, -1, -2), (a,), lambda g: (np.swapaxes(g, -1, -2),))


# ---------------------------------------------------------------------------
# linear algebra


def matmul(a, b) -> Tensor:
    """Batched matrix product; gradients ``g b^T`` and ``a^T g``."""
    a, b = as_tensor(a), as_tensor(b)
    if a.value.ndim < 2 or b.value.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise DimensionError(f"matmul shape mismatch: {a.shape} x {b.shape}")
    try:
        out = a.value @ b.value
    except ValueError:
        raise DimensionError(f"matmul batch mismatch: {a.shape} x {b.shape}") from None
    _tally(out.size * a.shape[-1])

    def _back(g):
        ga = _unbroadcast(g @ np.swapaxes(b.value, -1, -2), a.shape) if a.requires_grad else None
        gb = _unbroadcast(np.swapaxes(a.value, -1, -2) @ g, b.shape) if b.requires_grad else None
        return ga, gb

    return _make(out, (a, b), _back)


def softmax_rows(a: Tensor) -> Tensor:
    """Softmax over the last axis, computed after subtracting the row max."""
    shifted = a.value - a.value.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    s = e / e.sum(axis=-1, keepdims=True)

    def _back(g):
        return (s * (g - (g * s).sum(axis=-1, keepdims=True)),)

    return _make(s, (a,), _back)


def layer_norm(a: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalise each row (last axis) to zero mean and unit variance, then
    apply ``gain`` and ``bias`` (each of length ``a.shape[-1]``)."""
    a, gain, bias = as_tensor(a), as_tensor(gain), as_tensor(bias)
    width = a.shape[-1]
    if gain.value.size != width or bias.value.size != width:
        raise DimensionError(
            f"layer_norm gain/bias sizes {gain.shape}/{bias.shape} do not match width {width}")
    mu = a.value.mean(axis=-1, keepdims=True)
    xc = a.value - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    gv = gain.value.reshape(-1)
    out = xhat * gv + bias.value.reshape(-1)
    _tally(out.size)

    def _back(g):
        gx = g * gv
        da = inv * (gx - gx.mean(axis=-1, keepdims=True)
                    - xhat * (gx * xhat).mean(axis=-1, keepdims=True))
        dgain = (g * xhat).reshape(-1, width).sum(axis=0).reshape(gain.shape)
        dbias = g.reshape(-1, width).sum(axis=0).reshape(bias.shape)
        return da, dgain, dbias

    return _make(out, (a, gain, bias), _back)


def conv1d_temporal(x: Tensor, kernel: Tensor, kernel_size: int) -> Tensor:
    """Same-length temporal convolution of a ``(..., L, Cin)`` frame sequence.

    ``kernel`` is stored flat as ``(kernel_size * Cin, Cout)``; block ``j``
    multiplies frame ``t + j - kernel_size // 2``. Frames outside the
    sequence are zeros.
    """
    if kernel_size < 1 or kernel_size % 2 == 0:
        raise ConfigError(f"kernel_size must be odd and positive, got {kernel_size}")
    x, kernel = as_tensor(x), as_tensor(kernel)
    cin = x.shape[-1]
    if kernel.value.ndim != 2 or kernel.shape[0] != kernel_size * cin:
        raise DimensionError(
            f"conv kernel shape {kernel.shape} does not match kernel_size={kernel_size}, "
            f"input width {cin}")
    lead = x.shape[:-2]
    length = x.shape[-2]
    cout = kernel.shape[1]
    x3 = x.value.reshape(-1, length, cin)
    w3 = kernel.value.reshape(kernel_size, cin, cout)
    out = _kernels.conv1d(x3, w3)
    _tally(out.size * kernel_size * cin)

    def _back(g):
        g3 = g.reshape(-1, length, cout)
        gx = _kernels.conv1d_grad_input(g3, w3).reshape(x.shape) if x.requires_grad else None
        gw = (_kernels.conv1d_grad_weight(x3, g3, kernel_size).reshape(kernel.shape)
              if kernel.requires_grad else None)
        return gx, gw

    return _make(out.reshape(lead + (length, cout)), (x, kernel), _back)


# ---------------------------------------------------------------------------


def _topological(root: Tensor) -> list[Tensor]:
    order, seen = [], set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    return order


def backward(loss: Tensor) -> None:
    """Accumulate ``d loss / d leaf`` into every leaf that requires grad.

    Intermediate nodes get their gradient from this call only; leaves keep
    accumulating across calls until :meth:`Tensor.zero_grad`.
    """
    if loss.value.size != 1:
        raise UsageError(f"backward needs a scalar loss, got shape {loss.shape}")
    if not loss.requires_grad:
        return
    grads = {id(loss): np.ones_like(loss.value)}
    for node in reversed(_topological(loss)):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if node.is_leaf:
            node.grad = node.grad + g
            continue
        node.grad = g
        for parent, pg in zip(node._parents, node._backward(g)):
            if pg is None or not parent.requires_grad:
                continue
            key = id(parent)
            grads[key] = grads[key] + pg if key in grads else pg
