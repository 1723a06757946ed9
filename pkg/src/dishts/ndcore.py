"""Small dense-tensor layer with tape-based reverse-mode gradients.

Everything the models need is composed from a closed set of primitives
(``add``, ``sub``, ``mul``, ``div``, ``matvec``, ``sum``, ``mean``, ``sqrt``,
``square``, ``leaky_relu`` plus the structural ``clamp_min``, ``reshape``,
``transpose`` and ``take``), so a single finite-difference checker covers
every composite built on top.

Usage::

    v = Tensor([0.5, 0.5], requires_grad=True)
    with GradTape() as tape:
        loss = sum_(mul(v, [1.0, 2.0]))
    backward(tape, loss)     # v.grad == [1., 2.]

Gradients accumulate into ``Tensor.grad`` across calls; call
``zero_grad`` between steps.
"""

from __future__ import annotations

from typing import Callable, NamedTuple, Sequence

import numpy as np

from .errors import ContractError, NumericError, ShapeError

EPS_FLOOR = 1e-8
DEFAULT_SLOPE = 0.01


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "name", "_tracked")

    def __init__(self, data, requires_grad=False, name=None):
        arr = np.array(data, dtype=np.float64, copy=True, order="C")
        if not np.all(np.isfinite(arr)):
            raise NumericError(f"nonfinite values in tensor {name or ''}".rstrip())
        self.data = arr
        self.requires_grad = requires_grad
        self.name = name
        self.grad = np.zeros_like(arr) if requires_grad else None
        self._tracked = requires_grad

    @property
    def shape(self):
        return self.data.shape

    @property
    def size(self):
        return self.data.size

    def numpy(self):
        return self.data.copy()

    def item(self):
        if self.data.size != 1:
            raise ContractError(f"tensor of shape {self.shape} is not a scalar")
        return float(self.data.reshape(-1)[0])

    def zero_grad(self):
        if self.grad is not None:
            self.grad[...] = 0.0

    def __repr__(self):
        tag = f", name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{tag})"

    __add__ = lambda a, b: add(a, b)
    __radd__ = lambda a, b: add(b, a)
    __sub__ = lambda a, b: sub(a, b)
    __rsub__ = lambda a, b: sub(b, a)
    __mul__ = lambda a, b: mul(a, b)
    __rmul__ = lambda a, b: mul(b, a)
    __truediv__ = lambda a, b: div(a, b)
    __rtruediv__ = lambda a, b: div(b, a)
    __neg__ = lambda a: mul(a, -1.0)


class Node(NamedTuple):
    op: str
    inputs: tuple
    output: Tensor
    vjp: Callable


class GradTape:
    """Ordered record of primitive applications.

    Nodes are appended as operations execute, so they are already in
    topological order. Use as a context manager to make it the active tape.
    """

    _stack: list = []

    def __init__(self):
        self.nodes: list[Node] = []
        self.params: list[Tensor] = []
        self._param_ids: set[int] = set()

    def __enter__(self):
        GradTape._stack.append(self)
        return self

    def __exit__(self, *exc):
        GradTape._stack.pop()
        return False

    def watch(self, *params):
        for p in params:
            if not p.requires_grad:
                raise ContractError(f"{p!r} is not flagged learnable")
            if id(p) not in self._param_ids:
                self._param_ids.add(id(p))
                self.params.append(p)

    @classmethod
    def active(cls):
        return cls._stack[-1] if cls._stack else None


def as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _record(op, inputs, out, vjp):
    if not np.all(np.isfinite(out)):
        raise NumericError(f"{op}: result is not finite")
    result = Tensor.__new__(Tensor)
    result.data = out
    result.requires_grad = False
    result.grad = None
    result.name = None
    result._tracked = False
    tape = GradTape.active()
    if tape is not None and any(t._tracked for t in inputs):
        result._tracked = True
        tape.nodes.append(Node(op, inputs, result, vjp))
        tape.watch(*(t for t in inputs if t.requires_grad))
    return result


def _broadcast(op, a, b):
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(op, a.shape, b.shape) from None


def _unbroadcast(g, shape):
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


# -- elementwise binary ----------------------------------------------------

def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _broadcast("add", a, b)
    return _record("add", (a, b), a.data + b.data,
                   lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))


def sub(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _broadcast("sub", a, b)
    return _record("sub", (a, b), a.data - b.data,
                   lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)))


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _broadcast("mul", a, b)
    return _record("mul", (a, b), a.data * b.data,
                   lambda g: (_unbroadcast(g * b.data, a.shape),
                              _unbroadcast(g * a.data, b.shape)))


def div(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _broadcast("div", a, b)
    if np.any(b.data == 0.0):
        raise NumericError("div: zero denominator")
    out = a.data / b.data
    return _record("div", (a, b), out,
                   lambda g: (_unbroadcast(g / b.data, a.shape),
                              _unbroadcast(-g * out / b.data, b.shape)))


def matvec(w, x):
    """Batched matrix-vector product: ``w[..., m, k] @ x[..., k] -> [..., m]``.

    Leading dimensions broadcast, so a per-series weight stack ``(N, M, K)``
    applies to a batch ``(B, N, K)`` and a shared ``(M, K)`` to anything.
    """
    w, x = as_tensor(w), as_tensor(x)
    if w.data.ndim < 2 or x.data.ndim < 1 or w.shape[-1] != x.shape[-1]:
        raise ShapeError("matvec", w.shape, x.shape)
    try:
        np.broadcast_shapes(w.shape[:-2], x.shape[:-1])
    except ValueError:
        raise ShapeError("matvec", w.shape, x.shape) from None
    out = np.matmul(w.data, x.data[..., None])[..., 0]

    def vjp(g):
        gw = g[..., :, None] * x.data[..., None, :]
        gx = np.matmul(np.swapaxes(w.data, -1, -2), g[..., None])[..., 0]
        return _unbroadcast(gw, w.shape), _unbroadcast(gx, x.shape)

    return _record("matvec", (w, x), out, vjp)


# -- reductions ------------------------------------------------------------

def _expand_back(g, shape, axis, keepdims):
    if axis is None:
        return np.broadcast_to(np.reshape(g, (1,) * len(shape)), shape)
    if not keepdims:
        g = np.expand_dims(g, axis)
    return np.broadcast_to(g, shape)


def sum_(x, axis=None, keepdims=False):
    x = as_tensor(x)
    out = np.asarray(x.data.sum(axis=axis, keepdims=keepdims), dtype=np.float64)
    return _record("sum", (x,), out,
                   lambda g: (np.array(_expand_back(g, x.shape, axis, keepdims)),))


def mean(x, axis=None, keepdims=False):
    x = as_tensor(x)
    out = np.asarray(x.data.mean(axis=axis, keepdims=keepdims), dtype=np.float64)
    n = x.data.size // max(out.size, 1)
    return _record("mean", (x,), out,
                   lambda g: (np.array(_expand_back(g, x.shape, axis, keepdims)) / n,))


# -- elementwise unary -----------------------------------------------------

def square(x):
    x = as_tensor(x)
    return _record("square", (x,), x.data * x.data, lambda g: (2.0 * x.data * g,))


def sqrt(x):
    """Square root; the derivative denominator is floored at ``EPS_FLOOR``."""
    x = as_tensor(x)
    if np.any(x.data < 0.0):
        raise NumericError("sqrt: negative argument")
    out = np.sqrt(x.data)
    return _record("sqrt", (x,), out,
                   lambda g: (0.5 * g / np.maximum(out, EPS_FLOOR),))


def leaky_relu(x, slope=DEFAULT_SLOPE):
    x = as_tensor(x)
    pos = x.data > 0.0
    out = np.where(pos, x.data, slope * x.data)
    return _record("leaky_relu", (x,), out, lambda g: (np.where(pos, g, slope * g),))


def clamp_min(x, floor):
    x = as_tensor(x)
    keep = x.data >= floor
    out = np.where(keep, x.data, floor)
    return _record("clamp_min", (x,), out, lambda g: (np.where(keep, g, 0.0),))


# -- structural ------------------------------------------------------------

def reshape(x, shape):
    x = as_tensor(x)
    try:
        out = x.data.reshape(shape)
    except ValueError:
        raise ShapeError("reshape", x.shape, shape) from None
    return _record("reshape", (x,), out, lambda g: (g.reshape(x.shape),))


def transpose(x, axes):
    x = as_tensor(x)
    if sorted(axes) != list(range(x.data.ndim)):
        raise ShapeError("transpose", x.shape, axes)
    inv = np.argsort(axes)
    return _record("transpose", (x,), np.ascontiguousarray(x.data.transpose(axes)),
                   lambda g: (g.transpose(inv),))


def take(x, key):
    """Basic (slice/integer) indexing; gradient scatters back into place."""
    x = as_tensor(x)
    out = np.array(x.data[key])

    def vjp(g):
        full = np.zeros_like(x.data)
        full[key] += g
        return (full,)

    return _record("take", (x,), out, vjp)


Tensor.__getitem__ = take


# -- reverse pass ----------------------------------------------------------

def backward(tape: GradTape, loss: Tensor, params: Sequence[Tensor] | None = None):
    """Propagate d(loss)/d(param) into every learnable tensor on ``tape``.

    Returns the gradients of ``params`` (default: the tape's learnable
    tensors in first-use order). Parameters without a path to ``loss`` get
    exact zeros. Gradients are added to ``.grad``, never overwritten.
    """
    if loss.size != 1:
        raise ContractError(f"backward needs a scalar loss, got shape {loss.shape}")
    params = list(tape.params if params is None else params)
    pending = {id(loss): np.ones_like(loss.data)}
    for node in reversed(tape.nodes):
        g = pending.pop(id(node.output), None)
        if g is None:
            continue
        for t, gi in zip(node.inputs, node.vjp(g)):
            if not t._tracked:
                continue
            key = id(t)
            if key in pending:
                pending[key] = pending[key] + gi
            else:
                pending[key] = np.array(gi, dtype=np.float64)
    out = []
    for p in params:
        if p.grad is None:
            raise ContractError(f"{p!r} is not flagged learnable")
        g = pending.get(id(p))
        if g is not None:
            if not np.all(np.isfinite(g)):
                raise NumericError(f"nonfinite gradient for {p.name or p!r}")
            p.grad += g
        out.append(np.zeros_like(p.data) if g is None else g)
    return out


def zero_grad(params):
    for p in params:
        p.zero_grad()


def numerical_gradient(fn: Callable[[], float], param: Tensor, step=1e-6):
    """Central finite differences of scalar ``fn()`` w.r.t. ``param.data``.

    Runs with no active tape dependence: ``fn`` is re-evaluated after each
    in-place perturbation, so it must read ``param.data`` afresh.
    """
    grad = np.zeros_like(param.data)
    flat = param.data.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + step
        hi = float(fn())
        flat[i] = orig - step
        lo = float(fn())
        flat[i] = orig
        gflat[i] = (hi - lo) / (2.0 * step)
    return grad


def relative_error(analytic, numeric, floor=1e-6):
    a, n = np.asarray(analytic), np.asarray(numeric)
    denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)
    return float(np.max(np.abs(a - n) / denom)) if a.size else 0.0
