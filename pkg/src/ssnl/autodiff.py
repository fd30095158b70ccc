"""Minimal dense-tensor reverse-mode automatic differentiation.

Each operation computes its value eagerly with numpy and records a closure
holding the local gradient rule; ``Tensor.backward`` replays the recorded
graph once in reverse topological order, accumulating adjoints additively
across fan-out. float64 is the precision used by every gradient check;
float32 is accepted for training speed.

Shapes are always explicit. The only implicit broadcast is scalar-with-tensor
in the elementwise arithmetic; everything else goes through ``broadcast_to``.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

from .errors import ConfigError, ContractError, ShapeError

_node_ids = itertools.count()

_grad_enabled = True


class no_grad:
    """Context manager that suspends graph recording (inference fast path).

    Values are computed identically; only the bookkeeping is skipped. Not
    safe to toggle concurrently from multiple threads.
    """

    def __enter__(self):
        global _grad_enabled
        self._prev = _grad_enabled
        _grad_enabled = False
        return self

    def __exit__(self, *exc):
        global _grad_enabled
        _grad_enabled = self._prev
        return False


def _as_array(data) -> np.ndarray:
    if type(data) is np.ndarray and data.dtype.kind == "f":
        return data
    arr = np.asarray(data)
    if arr.dtype.kind != "f":
        arr = arr.astype(np.float64)
    return arr


class Tensor:
    """Dense n-d float array with a gradient slot and graph bookkeeping."""

    __slots__ = ("data", "grad", "requires_grad", "node_id", "_parents", "_backprop")

    def __init__(self, data, requires_grad: bool = False, *, _parents=(), _backprop=None):
        self.data = _as_array(data)
        self.grad: np.ndarray | None = None
        self.requires_grad = bool(requires_grad)
        self.node_id = next(_node_ids)
        self._parents = _parents
        self._backprop = _backprop

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self):
        self.grad = None

    def grad_array(self) -> np.ndarray:
        """Gradient of the last backward pass; zeros if this leaf was unreached."""
        if self.grad is None:
            return np.zeros_like(self.data)
        return self.grad

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype}, id={self.node_id})"

    # -- graph replay ------------------------------------------------------

    def backward(self):
        """Accumulate d(self)/d(leaf) into every reachable leaf's ``grad``.

        ``self`` must be scalar; each graph node is visited exactly once.
        """
        if self.data.shape != ():
            raise ContractError(
                f"backward requires a scalar loss, got shape {self.data.shape}"
            )
        self.grad = np.ones((), dtype=self.data.dtype)
        for node in _reverse_topo(self):
            if node._backprop is not None and node.grad is not None:
                node._backprop(node.grad)

    # -- operator sugar ----------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return mul(self, -1.0)

    def __sub__(self, other):
        return add(self, -_coerce(other))

    def __rsub__(self, other):
        return add(_coerce(other), -self)

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            raise ShapeError("tensor/tensor division is not supported; scale by a scalar")
        return mul(self, 1.0 / float(other))

    def sum(self):
        return tsum(self)

    def mean(self, axis=None):
        return mean(self, axis=axis)

    def reshape(self, *shape):
        return reshape(self, shape if len(shape) != 1 else shape[0])

    def transpose(self, *axes):
        return transpose(self, axes if axes else None)

    def flip(self, axis=0):
        return flip(self, axis)


def _coerce(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _reverse_topo(root: Tensor):
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, done = stack.pop()
        if done:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if id(parent) not in seen:
                stack.append((parent, False))
    return reversed(order)


def _accum(t: Tensor, g: np.ndarray):
    if not t.requires_grad:
        return
    t.grad = g if t.grad is None else t.grad + g


def _make(data, parents, backprop) -> Tensor:
    if _grad_enabled and any(p.requires_grad for p in parents):
        return Tensor(data, requires_grad=True, _parents=tuple(parents), _backprop=backprop)
    return Tensor(data)


def _scalar_reduce(g: np.ndarray, shape) -> np.ndarray:
    # adjoint of a scalar broadcast into `g.shape`
    if shape == ():
        return np.asarray(g.sum(), dtype=g.dtype)
    return g


# -- elementwise arithmetic --------------------------------------------------


def add(a, b) -> Tensor:
    a, b = _coerce(a), _coerce(b)
    if a.shape != b.shape and a.shape != () and b.shape != ():
        raise ShapeError(f"add shapes differ: {a.shape} vs {b.shape}")
    out_data = a.data + b.data

    def backprop(g):
        _accum(a, _scalar_reduce(g, a.shape))
        _accum(b, _scalar_reduce(g, b.shape))

    return _make(out_data, (a, b), backprop)


def mul(a, b) -> Tensor:
    a, b = _coerce(a), _coerce(b)
    if a.shape != b.shape and a.shape != () and b.shape != ():
        raise ShapeError(f"mul shapes differ: {a.shape} vs {b.shape}")
    out_data = a.data * b.data

    def backprop(g):
        _accum(a, _scalar_reduce(g * b.data, a.shape))
        _accum(b, _scalar_reduce(g * a.data, b.shape))

    return _make(out_data, (a, b), backprop)


# -- linear algebra -----------------------------------------------------------


def matmul(a, b) -> Tensor:
    """Matrix product for (m,k)@(k,n) and matrix-vector (m,k)@(k,)."""
    a, b = _coerce(a), _coerce(b)
    if a.ndim != 2 or b.ndim not in (1, 2):
        raise ShapeError(f"matmul expects 2-d @ (1|2)-d, got {a.shape} @ {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul inner dimensions disagree: {a.shape} @ {b.shape}")
    out_data = a.data @ b.data

    if b.ndim == 2:

        def backprop(g):
            _accum(a, g @ b.data.T)
            _accum(b, a.data.T @ g)

    else:

        def backprop(g):
            _accum(a, np.outer(g, b.data))
            _accum(b, a.data.T @ g)

    return _make(out_data, (a, b), backprop)


# -- convolutions --------------------------------------------------------------


def conv1d(x, kernel) -> Tensor:
    """Depthwise 1-d convolution along the last axis with zero same-padding.

    ``x`` is (channels, length), ``kernel`` is (channels, k) with k odd; each
    channel is convolved with its own kernel, output length equals input
    length (cross-correlation orientation).
    """
    x, kernel = _coerce(x), _coerce(kernel)
    if x.ndim != 2 or kernel.ndim != 2:
        raise ShapeError(f"conv1d expects 2-d operands, got {x.shape} and {kernel.shape}")
    if kernel.shape[1] % 2 == 0:
        raise ConfigError(f"conv1d kernel width must be odd, got {kernel.shape[1]}")
    if x.shape[0] != kernel.shape[0]:
        raise ShapeError(
            f"conv1d channel counts differ: input {x.shape} vs kernel {kernel.shape}"
        )
    channels, length = x.shape
    k = kernel.shape[1]
    pad = (k - 1) // 2
    xp = np.zeros((channels, length + 2 * pad), dtype=x.dtype)
    xp[:, pad:pad + length] = x.data
    out_data = np.zeros((channels, length), dtype=x.dtype)
    for j in range(k):
        out_data += kernel.data[:, j:j + 1] * xp[:, j:j + length]

    def backprop(g):
        gk = np.empty_like(kernel.data)
        gxp = np.zeros_like(xp)
        for j in range(k):
            gk[:, j] = (g * xp[:, j:j + length]).sum(axis=1)
            gxp[:, j:j + length] += kernel.data[:, j:j + 1] * g
        _accum(kernel, gk)
        _accum(x, gxp[:, pad:pad + length])

    return _make(out_data, (x, kernel), backprop)


def conv2d(x, kernels) -> Tensor:
    """Cross-channel 2-d convolution with zero same-padding.

    ``x`` is (in_channels, h, w); ``kernels`` is (out_channels, in_channels,
    k, k) with k odd. Output is (out_channels, h, w).
    """
    x, kernels = _coerce(x), _coerce(kernels)
    if x.ndim != 3 or kernels.ndim != 4:
        raise ShapeError(f"conv2d expects 3-d input and 4-d kernels, got {x.shape} and {kernels.shape}")
    if kernels.shape[2] != kernels.shape[3]:
        raise ShapeError(f"conv2d kernels must be square, got {kernels.shape}")
    if kernels.shape[2] % 2 == 0:
        raise ConfigError(f"conv2d kernel width must be odd, got {kernels.shape[2]}")
    if x.shape[0] != kernels.shape[1]:
        raise ShapeError(
            f"conv2d channel counts differ: input {x.shape} vs kernels {kernels.shape}"
        )
    cin, h, w = x.shape
    cout, k = kernels.shape[0], kernels.shape[2]
    pad = (k - 1) // 2
    xp = np.zeros((cin, h + 2 * pad, w + 2 * pad), dtype=x.dtype)
    xp[:, pad:pad + h, pad:pad + w] = x.data
    # im2col: one matmul instead of k*k accumulation passes
    cols = np.empty((cin, k, k, h * w), dtype=x.dtype)
    for u in range(k):
        for v in range(k):
            cols[:, u, v, :] = xp[:, u:u + h, v:v + w].reshape(cin, h * w)
    cols2 = cols.reshape(cin * k * k, h * w)
    kern2 = kernels.data.reshape(cout, cin * k * k)
    out_data = (kern2 @ cols2).reshape(cout, h, w)

    def backprop(g):
        g2 = g.reshape(cout, h * w)
        _accum(kernels, (g2 @ cols2.T).reshape(kernels.shape))
        gcols = (kern2.T @ g2).reshape(cin, k, k, h * w)
        gxp = np.zeros_like(xp)
        for u in range(k):
            for v in range(k):
                gxp[:, u:u + h, v:v + w] += gcols[:, u, v, :].reshape(cin, h, w)
        _accum(x, gxp[:, pad:pad + h, pad:pad + w])

    return _make(out_data, (x, kernels), backprop)


# -- normalization and activations ---------------------------------------------


def layer_norm(x, gain, bias, eps: float = 1e-5) -> Tensor:
    """Normalize the last axis to zero mean / unit population variance, then
    apply elementwise gain and bias."""
    x, gain, bias = _coerce(x), _coerce(gain), _coerce(bias)
    n = x.shape[-1]
    if gain.shape != (n,) or bias.shape != (n,):
        raise ShapeError(
            f"layer_norm gain/bias must be ({n},), got {gain.shape} and {bias.shape}"
        )
    mu = x.data.mean(axis=-1, keepdims=True)
    var = x.data.var(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mu) * inv
    out_data = xhat * gain.data + bias.data

    def backprop(g):
        lead = tuple(range(x.ndim - 1))
        _accum(gain, (g * xhat).sum(axis=lead))
        _accum(bias, g.sum(axis=lead))
        gxhat = g * gain.data
        m1 = gxhat.mean(axis=-1, keepdims=True)
        m2 = (gxhat * xhat).mean(axis=-1, keepdims=True)
        _accum(x, inv * (gxhat - m1 - xhat * m2))

    return _make(out_data, (x, gain, bias), backprop)


def _sigmoid(d: np.ndarray) -> np.ndarray:
    # exp(-|d|) never overflows; both where-branches stay finite
    e = np.exp(-np.abs(d))
    return np.where(d >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def silu(x) -> Tensor:
    x = _coerce(x)
    s = _sigmoid(x.data)
    out_data = x.data * s

    def backprop(g):
        _accum(x, g * (s * (1.0 + x.data * (1.0 - s))))

    return _make(out_data, (x,), backprop)


def tanh(x) -> Tensor:
    x = _coerce(x)
    t = np.tanh(x.data)

    def backprop(g):
        _accum(x, g * (1.0 - t * t))

    return _make(t, (x,), backprop)


_ACTIVATIONS = {"silu": silu, "tanh": tanh}


def activation(kind: str, x) -> Tensor:
    """Apply the named elementwise nonlinearity (``silu`` or ``tanh``)."""
    try:
        fn = _ACTIVATIONS[kind]
    except KeyError:
        raise ConfigError(f"unknown activation kind {kind!r}; expected one of "
                          f"{sorted(_ACTIVATIONS)}") from None
    return fn(x)


def softplus(x) -> Tensor:
    """log(1 + exp(x)), evaluated stably; maps any real to a positive value."""
    x = _coerce(x)
    out_data = np.maximum(x.data, 0.0) + np.log1p(np.exp(-np.abs(x.data)))

    def backprop(g):
        _accum(x, g * _sigmoid(x.data))

    return _make(out_data, (x,), backprop)


def softmax(x) -> Tensor:
    """Exp-normalize a vector via max subtraction; output sums to one."""
    x = _coerce(x)
    if x.ndim != 1 or x.size < 1:
        raise ShapeError(f"softmax expects a non-empty vector, got shape {x.shape}")
    z = x.data - x.data.max()
    e = np.exp(z)
    p = e / e.sum()

    def backprop(g):
        _accum(x, p * (g - (g * p).sum()))

    return _make(p, (x,), backprop)


def log_sum_exp(x) -> Tensor:
    """Scalar log(sum(exp(x))) of a vector, max-stabilized."""
    x = _coerce(x)
    if x.ndim != 1 or x.size < 1:
        raise ShapeError(f"log_sum_exp expects a non-empty vector, got shape {x.shape}")
    m = x.data.max()
    out_data = np.asarray(m + np.log(np.exp(x.data - m).sum()), dtype=x.dtype)

    def backprop(g):
        z = np.exp(x.data - m)
        _accum(x, g * (z / z.sum()))

    return _make(out_data, (x,), backprop)


def pick(x, index: int) -> Tensor:
    """Select one coordinate of a vector as a scalar."""
    x = _coerce(x)
    if x.ndim != 1:
        raise ShapeError(f"pick expects a vector, got shape {x.shape}")
    if not 0 <= index < x.size:
        raise ContractError(f"pick index {index} outside [0, {x.size})")
    out_data = np.asarray(x.data[index], dtype=x.dtype)

    def backprop(g):
        gx = np.zeros_like(x.data)
        gx[index] = g
        _accum(x, gx)

    return _make(out_data, (x,), backprop)


# -- reductions and shape ops ----------------------------------------------------


def tsum(x) -> Tensor:
    """Sum of all elements, as a scalar tensor."""
    x = _coerce(x)
    out_data = np.asarray(x.data.sum(), dtype=x.dtype)

    def backprop(g):
        _accum(x, np.full_like(x.data, g))

    return _make(out_data, (x,), backprop)


def _fsum_axis(d: np.ndarray, axes: tuple[int, ...]) -> np.ndarray:
    # exactly rounded, order-invariant sum over `axes` (math.fsum per slot)
    keep = tuple(i for i in range(d.ndim) if i not in axes)
    moved = np.transpose(d, axes + keep)
    red = int(np.prod([d.shape[i] for i in axes], dtype=np.int64))
    flat = moved.reshape(red, -1)
    cols = flat.shape[1]
    out = np.empty(cols, dtype=np.float64)
    lists = flat.T.tolist()
    for j in range(cols):
        out[j] = math.fsum(lists[j])
    return out.reshape(tuple(d.shape[i] for i in keep))


def mean(x, axis=None) -> Tensor:
    """Arithmetic mean, exactly rounded (order-invariant accumulation).

    ``axis`` may be None (all elements, scalar result), an int, or a tuple.
    """
    x = _coerce(x)
    if axis is None:
        axes = tuple(range(x.ndim))
    elif isinstance(axis, int):
        axes = (axis % x.ndim,)
    else:
        axes = tuple(a % x.ndim for a in axis)
    count = int(np.prod([x.shape[a] for a in axes], dtype=np.int64))
    out_data = (_fsum_axis(x.data, axes) / count).astype(x.dtype)
    if axis is None:
        out_data = np.asarray(out_data.reshape(()), dtype=x.dtype)

    def backprop(g):
        expanded = np.expand_dims(g, axes) if g.ndim else g
        _accum(x, (np.broadcast_to(expanded, x.shape) / count).astype(x.dtype))

    return _make(out_data, (x,), backprop)


def reshape(x, shape) -> Tensor:
    x = _coerce(x)
    out_data = x.data.reshape(shape)

    def backprop(g):
        _accum(x, g.reshape(x.shape))

    return _make(out_data, (x,), backprop)


def transpose(x, axes=None) -> Tensor:
    x = _coerce(x)
    axes_t = tuple(axes) if axes is not None else tuple(reversed(range(x.ndim)))
    inverse = tuple(np.argsort(axes_t))
    out_data = np.transpose(x.data, axes_t)

    def backprop(g):
        _accum(x, np.transpose(g, inverse))

    return _make(out_data, (x,), backprop)


def flip(x, axis: int = 0) -> Tensor:
    x = _coerce(x)
    out_data = np.flip(x.data, axis=axis).copy()

    def backprop(g):
        _accum(x, np.flip(g, axis=axis))

    return _make(out_data, (x,), backprop)


def concat(tensors) -> Tensor:
    """Concatenate vectors into one vector."""
    tensors = [_coerce(t) for t in tensors]
    for t in tensors:
        if t.ndim != 1:
            raise ShapeError(f"concat expects vectors, got shape {t.shape}")
    out_data = np.concatenate([t.data for t in tensors])

    def backprop(g):
        offset = 0
        for t in tensors:
            _accum(t, g[offset:offset + t.size])
            offset += t.size

    return _make(out_data, tuple(tensors), backprop)


def broadcast_to(x, shape) -> Tensor:
    """Explicit broadcast; the adjoint sums over the expanded axes."""
    x = _coerce(x)
    shape = tuple(shape)
    out_data = np.broadcast_to(x.data, shape).copy()
    extra = len(shape) - x.ndim
    summed = tuple(range(extra)) + tuple(
        extra + i for i, s in enumerate(x.shape) if s == 1 and shape[extra + i] != 1
    )

    def backprop(g):
        gx = g.sum(axis=summed) if summed else g
        _accum(x, gx.reshape(x.shape))

    return _make(out_data, (x,), backprop)


# -- checking -----------------------------------------------------------------


def grad_check(fn, inputs, step: float = 1e-6) -> float:
    """Worst relative error between tape gradients and central differences.

    ``fn`` must be a pure, deterministic function of the given leaf tensors
    returning a scalar tensor. The error denominator is
    ``max(1e-8, |analytic| + |numeric|)`` per coordinate.
    """
    inputs = list(inputs)
    for t in inputs:
        t.zero_grad()
    loss = fn(*inputs)
    loss.backward()
    analytic = [t.grad_array().copy() for t in inputs]

    worst = 0.0
    for t, ga in zip(inputs, analytic):
        if not t.requires_grad:
            continue
        for idx in np.ndindex(t.data.shape):
            orig = t.data[idx]
            t.data[idx] = orig + step
            up = fn(*inputs).item()
            t.data[idx] = orig - step
            down = fn(*inputs).item()
            t.data[idx] = orig
            numeric = (up - down) / (2.0 * step)
            a = float(ga[idx])
            err = abs(a - numeric) / max(1e-8, abs(a) + abs(numeric))
            worst = max(worst, err)
    return worst
