"""A small reverse-mode autodiff engine over numpy arrays.

Each :class:`Tensor` produced by an op while recording is enabled remembers its
parents and a closure that pushes its gradient back to them.  ``backward``
walks that tape in reverse topological order.  Only the ops the models need
are provided; all of them accept arrays of any float dtype and keep it.

Reductions and matrix products accumulate in float64 and cast back.
"""
from __future__ import annotations

import contextlib
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import LabelRangeError, NoTapeError, ShapeError

__all__ = [
    "Tensor",
    "no_grad",
    "is_grad_enabled",
    "concat",
    "masked",
    "matmul",
    "relu",
    "tanh",
    "identity",
    "softmax_cross_entropy",
    "sgd_step",
    "ACTIVATIONS",
]

_GRAD_ENABLED = True


@contextlib.contextmanager
def no_grad():
    """Disable tape recording inside the block."""
    global _GRAD_ENABLED
    prev = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


def is_grad_enabled() -> bool:
    return _GRAD_ENABLED


class Tensor:
    """Dense array with an optional gradient buffer and tape links."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "name")

    def __init__(self, data, requires_grad: bool = False, dtype=None, name: str | None = None):
        arr = np.array(data, dtype=dtype if dtype is not None else None, copy=True)
        if arr.dtype.kind not in "f":
            arr = arr.astype(np.float32)
        self.data: np.ndarray = arr
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable[[np.ndarray], None] | None = None
        self.name = name

    @classmethod
    def _from_op(cls, data: np.ndarray, parents: Sequence[Tensor], backward) -> Tensor:
        out = cls.__new__(cls)
        out.data = data
        out.grad = None
        out.name = None
        track = _GRAD_ENABLED and any(p.requires_grad for p in parents)
        out.requires_grad = track
        out._parents = tuple(parents) if track else ()
        out._backward = backward if track else None
        return out

    # -- basic properties -------------------------------------------------
    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self) -> int:
        return self.data.size

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def detach(self) -> Tensor:
        return Tensor(self.data, dtype=self.data.dtype)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, dtype={self.dtype}, requires_grad={self.requires_grad})"

    def _accumulate(self, g: np.ndarray) -> None:
        if not self.requires_grad:
            return
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g.astype(self.data.dtype, copy=False)

    # -- autodiff ---------------------------------------------------------
    def backward(self) -> None:
        """Populate ``.grad`` of every leaf that contributed to this scalar."""
        if self._backward is None:
            raise NoTapeError("tensor was not produced by a recorded operation")
        if self.data.size != 1:
            raise ShapeError(f"backward needs a scalar, got shape {self.shape}")
        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            t, expanded = stack.pop()
            if expanded:
                order.append(t)
                continue
            if id(t) in seen:
                continue
            seen.add(id(t))
            stack.append((t, True))
            for p in t._parents:
                if id(p) not in seen:
                    stack.append((p, False))
        grads: dict[int, np.ndarray] = {id(self): np.ones_like(self.data)}
        for t in reversed(order):
            g = grads.pop(id(t), None)
            if g is None:
                continue
            if t._backward is None:
                t._accumulate(g)
                continue
            for p, pg in zip(t._parents, t._backward(g)):
                if pg is None or not p.requires_grad:
                    continue
                if id(p) in grads:
                    grads[id(p)] = grads[id(p)] + pg
                else:
                    grads[id(p)] = pg

    # -- operators --------------------------------------------------------
    def __add__(self, other) -> Tensor:
        return add(self, _wrap(other, self.dtype))

    __radd__ = __add__

    def __sub__(self, other) -> Tensor:
        return add(self, mul(_wrap(other, self.dtype), -1.0))

    def __mul__(self, other) -> Tensor:
        return mul(self, other)

    __rmul__ = __mul__

    def __matmul__(self, other) -> Tensor:
        return matmul(self, other)

    def sum(self) -> Tensor:
        return tsum(self)

    def mean(self) -> Tensor:
        return tsum(self) * (1.0 / self.data.size)

    def reshape(self, *shape) -> Tensor:
        return reshape(self, shape[0] if len(shape) == 1 and isinstance(shape[0], tuple) else shape)

    def take(self, index, axis: int = 1) -> Tensor:
        return take(self, index, axis)


def _wrap(x, dtype) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=dtype))


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


def add(a: Tensor, b: Tensor) -> Tensor:
    def backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return Tensor._from_op(a.data + b.data, (a, b), backward)


def mul(a: Tensor, b) -> Tensor:
    """Elementwise product; ``b`` may be a Tensor or a constant."""
    if not isinstance(b, Tensor):
        c = np.asarray(b, dtype=a.dtype)

        def backward_const(g):
            return (_unbroadcast(g * c, a.shape),)

        return Tensor._from_op(a.data * c, (a,), backward_const)

    def backward(g):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)

    return Tensor._from_op(a.data * b.data, (a, b), backward)


def masked(w: Tensor, mask: np.ndarray) -> Tensor:
    """Effective weight ``W * M`` with masked entries forced to exactly 0.

    ``np.where`` is used instead of a product so that any value stored at a
    masked position (even inf or nan) cannot leak into the output.  The
    gradient is ``g * M``, so masked positions always receive 0.
    """
    keep = mask.astype(bool, copy=False)
    if keep.shape != w.shape:
        raise ShapeError(f"mask shape {keep.shape} != weight shape {w.shape}")
    zero = np.zeros((), dtype=w.dtype)

    def backward(g):
        return (np.where(keep, g, zero),)

    return Tensor._from_op(np.where(keep, w.data, zero), (w,), backward)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"cannot multiply {a.shape} by {b.shape}")
    dt = np.result_type(a.dtype, b.dtype)
    a64, b64 = a.data.astype(np.float64), b.data.astype(np.float64)

    def backward(g):
        g64 = g.astype(np.float64)
        return (g64 @ b64.T).astype(a.dtype), (a64.T @ g64).astype(b.dtype)

    return Tensor._from_op((a64 @ b64).astype(dt), (a, b), backward)


def tsum(a: Tensor) -> Tensor:
    def backward(g):
        return (np.broadcast_to(g, a.shape).astype(a.dtype),)

    return Tensor._from_op(np.asarray(a.data.sum(dtype=np.float64), dtype=a.dtype), (a,), backward)


def reshape(a: Tensor, shape) -> Tensor:
    def backward(g):
        return (g.reshape(a.shape),)

    return Tensor._from_op(a.data.reshape(shape), (a,), backward)


def take(a: Tensor, index, axis: int = 1) -> Tensor:
    """Select entries along ``axis``; duplicate indices accumulate gradient."""
    index = np.asarray(index, dtype=np.intp)

    def backward(g):
        out = np.zeros_like(a.data)
        moved = np.moveaxis(out, axis, 0)
        np.add.at(moved, index, np.moveaxis(g, axis, 0))
        return (out,)

    return Tensor._from_op(np.take(a.data, index, axis=axis), (a,), backward)


def concat(tensors: Sequence[Tensor], axis: int = 1) -> Tensor:
    tensors = list(tensors)
    if len(tensors) == 1:
        return tensors[0]
    sizes = [t.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def backward(g):
        return tuple(np.split(g, splits, axis=axis))

    return Tensor._from_op(np.concatenate([t.data for t in tensors], axis=axis), tensors, backward)


def relu(a: Tensor) -> Tensor:
    """Rectifier; the derivative at exactly 0 is taken to be 0."""
    pos = a.data > 0

    def backward(g):
        return (np.where(pos, g, 0).astype(g.dtype, copy=False),)

    return Tensor._from_op(np.where(pos, a.data, 0).astype(a.dtype, copy=False), (a,), backward)


def tanh(a: Tensor) -> Tensor:
    y = np.tanh(a.data)

    def backward(g):
        return (g * (1 - y * y),)

    return Tensor._from_op(y, (a,), backward)


def identity(a: Tensor) -> Tensor:
    return a


ACTIVATIONS: dict[str, Callable[[Tensor], Tensor]] = {
    "relu": relu,
    "tanh": tanh,
    "identity": identity,
}


def softmax_cross_entropy(logits: Tensor, labels) -> Tensor:
    """Mean negative log-likelihood of ``labels`` under ``softmax(logits)``.

    Computed in float64 with the row maximum subtracted first.
    """
    labels = np.asarray(labels)
    if logits.data.ndim != 2:
        raise ShapeError(f"logits must be (batch, classes), got {logits.shape}")
    n, c = logits.shape
    if labels.shape != (n,):
        raise ShapeError(f"expected {n} labels, got shape {labels.shape}")
    if not np.issubdtype(labels.dtype, np.integer):
        if not np.all(np.mod(labels, 1) == 0):
            raise LabelRangeError("labels must be integers")
        labels = labels.astype(np.int64)
    if n and (labels.min() < 0 or labels.max() >= c):
        raise LabelRangeError(f"labels must lie in [0, {c}), got range [{labels.min()}, {labels.max()}]")
    z = logits.data.astype(np.float64)
    z = z - z.max(axis=1, keepdims=True)
    logsum = np.log(np.exp(z).sum(axis=1))
    rows = np.arange(n)
    loss = float(np.mean(logsum - z[rows, labels]))

    def backward(g):
        p = np.exp(z - logsum[:, None])
        p[rows, labels] -= 1.0
        return ((p * (float(g) / n)).astype(logits.dtype),)

    return Tensor._from_op(np.asarray(loss, dtype=logits.dtype), (logits,), backward)


def sgd_step(params: Iterable[Tensor], lr: float) -> None:
    """Plain gradient descent ``p <- p - lr * grad(p)``; params without grads are skipped."""
    if lr < 0:
        raise ValueError(f"learning rate must be non-negative, got {lr}")
    for p in params:
        if p.grad is None:
            continue
        p.data -= (lr * p.grad).astype(p.dtype, copy=False)
