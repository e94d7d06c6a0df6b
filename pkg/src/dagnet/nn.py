"""Masked linear layers: the sparsity primitive every model is built from."""
from __future__ import annotations

import numpy as np

from .errors import ShapeError, SizeError
from .tensor import Tensor, add, masked, matmul

__all__ = ["MaskedLinear", "uniform_init"]


def uniform_init(rng: np.random.Generator, out_features: int, in_features: int,
                 mask: np.ndarray | None = None, fanin: str = "dense",
                 dtype=np.float32) -> np.ndarray:
    """Draw ``U(-a, a)`` weights with ``a = sqrt(6 / fan_in)``.

    ``fanin="dense"`` uses the full input width; ``"masked"`` uses each row's
    number of unmasked inputs (at least 1).
    """
    u = rng.random((out_features, in_features))
    if fanin == "dense":
        fan = np.full((out_features, 1), max(in_features, 1), dtype=np.float64)
    elif fanin == "masked":
        if mask is None:
            mask = np.ones((out_features, in_features), dtype=np.uint8)
        fan = np.maximum(mask.sum(axis=1, keepdims=True), 1).astype(np.float64)
    else:
        raise ValueError(f"fanin must be 'dense' or 'masked', got {fanin!r}")
    a = np.sqrt(6.0 / fan)
    return ((2.0 * u - 1.0) * a).astype(dtype)


class MaskedLinear:
    """``y = x (W * M)^T + b`` with a binary mask ``M`` of the same shape as ``W``.

    The mask is a plain ``uint8`` array, not a parameter.  Because the forward
    pass uses the effective weight ``W * M``, positions with ``M == 0`` have no
    influence on the output and always receive a zero gradient.
    """

    def __init__(self, in_features: int, out_features: int, bias: bool = True,
                 mask: np.ndarray | None = None, rng: np.random.Generator | None = None,
                 init_fanin: str = "dense", dtype=np.float32, name: str = ""):
        if in_features < 1 or out_features < 1:
            raise SizeError(f"layer sizes must be >= 1, got {in_features} -> {out_features}")
        self.in_features = in_features
        self.out_features = out_features
        self.name = name
        if mask is None:
            mask = np.ones((out_features, in_features), dtype=np.uint8)
        self.mask = _check_mask(mask, (out_features, in_features))
        rng = rng if rng is not None else np.random.default_rng(0)
        w = uniform_init(rng, out_features, in_features, self.mask, init_fanin, dtype)
        self.weight = Tensor(w, requires_grad=True, dtype=dtype, name=f"{name}.weight")
        self.bias = (Tensor(np.zeros(out_features, dtype=dtype), requires_grad=True,
                            dtype=dtype, name=f"{name}.bias") if bias else None)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.out_features, self.in_features)

    def set_mask(self, mask: np.ndarray) -> None:
        self.mask = _check_mask(mask, self.shape)

    def effective_weight(self) -> np.ndarray:
        return np.where(self.mask.astype(bool), self.weight.data, 0).astype(self.weight.dtype)

    def parameters(self) -> list[Tensor]:
        return [self.weight] if self.bias is None else [self.weight, self.bias]

    def forward(self, x: Tensor) -> Tensor:
        if x.data.ndim != 2 or x.shape[1] != self.in_features:
            raise ShapeError(f"{self.name or 'layer'} expects (batch, {self.in_features}), got {x.shape}")
        w = masked(self.weight, self.mask)
        y = matmul(x, _transpose(w))
        return add(y, self.bias) if self.bias is not None else y

    __call__ = forward

    def __repr__(self) -> str:
        return (f"MaskedLinear({self.in_features} -> {self.out_features}, name={self.name!r}, "
                f"density={self.mask.mean():.4f})")


def _check_mask(mask, shape) -> np.ndarray:
    m = np.asarray(mask)
    if m.shape != tuple(shape):
        raise ShapeError(f"mask shape {m.shape} != {tuple(shape)}")
    if not np.isin(m, (0, 1)).all():
        raise ValueError("mask entries must be 0 or 1")
    return m.astype(np.uint8)


def _transpose(t: Tensor) -> Tensor:
    def backward(g):
        return (g.T,)

    return Tensor._from_op(t.data.T, (t,), backward)
