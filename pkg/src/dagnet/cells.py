"""Cell-based networks: one high-level operation per graph vertex.

A cell maps a feature map ``(batch, in_channels, H, W)`` to
``(batch, out_channels, H, W)``.  Source vertices read the network input;
every other vertex reads its predecessors' outputs stacked along the channel
axis in ascending vertex-id order.  Sink outputs are globally average-pooled,
stacked, and fed to a dense readout.

Cells come from a user-supplied constructor called as::

    constructor(is_input, is_output, in_degree, out_degree, layer, input_channel_size)

:class:`ChannelMixCell` (pointwise channel mixing) is trainable.
:class:`ReductionCell` (5x5 convolution, ReLU, batch normalization) runs
forward only.
"""
from __future__ import annotations

from typing import Callable

import numpy as np

from .errors import CellArityError, EmptyGraphError, ShapeError
from .graph import Dag, LayeredDag, compute_layering
from .models import Model
from .nn import MaskedLinear, uniform_init
from .tensor import ACTIVATIONS, Tensor, concat

__all__ = [
    "Cell",
    "ChannelMixCell",
    "ReductionCell",
    "DeepCellDAN",
    "build_cell_dan",
    "channel_mix_constructor",
    "reduction_constructor",
    "CELL_TYPES",
    "global_avg_pool",
]

CellConstructor = Callable[[bool, bool, int, int, int, int], "Cell"]


# -- ops ---------------------------------------------------------------------

def channel_mix(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """Pointwise (1x1) channel mixing: ``y[:, o] = sum_c w[o, c] x[:, c] + b[o]``."""
    if x.data.ndim != 4 or x.shape[1] != w.shape[1]:
        raise ShapeError(f"cannot mix {x.shape} with weight {w.shape}")
    x64, w64 = x.data.astype(np.float64), w.data.astype(np.float64)
    y = np.einsum("oc,bchw->bohw", w64, x64) + b.data.astype(np.float64)[None, :, None, None]

    def backward(g):
        g64 = g.astype(np.float64)
        gx = np.einsum("oc,bohw->bchw", w64, g64).astype(x.dtype)
        gw = np.einsum("bohw,bchw->oc", g64, x64).astype(w.dtype)
        gb = g64.sum(axis=(0, 2, 3)).astype(b.dtype)
        return gx, gw, gb

    return Tensor._from_op(y.astype(x.dtype), (x, w, b), backward)


def global_avg_pool(x: Tensor) -> Tensor:
    """``(batch, C, H, W) -> (batch, C)`` spatial mean."""
    if x.data.ndim != 4:
        raise ShapeError(f"expected a 4-D feature map, got {x.shape}")
    hw = x.shape[2] * x.shape[3]

    def backward(g):
        return (np.broadcast_to(g[:, :, None, None] / hw, x.shape).astype(x.dtype),)

    return Tensor._from_op(x.data.mean(axis=(2, 3), dtype=np.float64).astype(x.dtype), (x,), backward)


def _forward_only(name):
    def backward(g):
        raise NotImplementedError(f"{name} has no backward pass; it is forward-only")

    return backward


def conv2d_same(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """Stride-1 convolution with zero padding that preserves H and W (odd kernels)."""
    kh, kw = w.shape[2], w.shape[3]
    if x.data.ndim != 4 or x.shape[1] != w.shape[1]:
        raise ShapeError(f"cannot convolve {x.shape} with kernel {w.shape}")
    ph, pw = kh // 2, kw // 2
    xp = np.pad(x.data.astype(np.float64), ((0, 0), (0, 0), (ph, ph), (pw, pw)))
    win = np.lib.stride_tricks.sliding_window_view(xp, (kh, kw), axis=(2, 3))
    y = np.einsum("bchwij,ocij->bohw", win, w.data.astype(np.float64), optimize=True)
    y += b.data.astype(np.float64)[None, :, None, None]
    return Tensor._from_op(y.astype(x.dtype), (x, w, b), _forward_only("conv2d"))


def batch_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize each channel with the statistics of the current batch."""
    x64 = x.data.astype(np.float64)
    mu = x64.mean(axis=(0, 2, 3), keepdims=True)
    var = x64.var(axis=(0, 2, 3), keepdims=True)
    y = (x64 - mu) / np.sqrt(var + eps)
    y = y * gamma.data[None, :, None, None] + beta.data[None, :, None, None]
    return Tensor._from_op(y.astype(x.dtype), (x, gamma, beta), _forward_only("batch_norm"))


# -- cells ---------------------------------------------------------------------

class Cell:
    """Base class; subclasses set ``in_channels``/``out_channels`` and parameters."""

    kind = "cell"
    in_channels: int
    out_channels: int

    def named_parameters(self) -> list[tuple[str, Tensor]]:
        return []

    def parameters(self) -> list[Tensor]:
        return [p for _, p in self.named_parameters()]

    def reset_parameters(self, rng: np.random.Generator) -> None:
        pass

    def config(self) -> dict:
        return {"in_channels": self.in_channels, "out_channels": self.out_channels}

    def forward(self, x: Tensor) -> Tensor:  # pragma: no cover - abstract
        raise NotImplementedError

    def __call__(self, x: Tensor) -> Tensor:
        return self.forward(x)


class ChannelMixCell(Cell):
    """Pointwise channel mixer followed by an activation; trainable."""

    kind = "channel_mix"

    def __init__(self, in_channels: int, out_channels: int = 1, activation: str = "relu",
                 dtype=np.float32):
        self.in_channels = int(in_channels)
        self.out_channels = int(out_channels)
        self.activation = activation
        self.weight = Tensor(np.zeros((out_channels, in_channels), dtype=dtype), requires_grad=True)
        self.bias = Tensor(np.zeros(out_channels, dtype=dtype), requires_grad=True)
        self.reset_parameters(np.random.default_rng(0))

    def reset_parameters(self, rng):
        self.weight.data[...] = uniform_init(rng, self.out_channels, self.in_channels,
                                             dtype=self.weight.dtype)
        self.bias.data[...] = 0

    def named_parameters(self):
        return [("weight", self.weight), ("bias", self.bias)]

    def config(self):
        return {**super().config(), "activation": self.activation}

    def forward(self, x):
        return ACTIVATIONS[self.activation](channel_mix(x, self.weight, self.bias))


class ReductionCell(Cell):
    """5x5 convolution, ReLU, then batch normalization (forward only)."""

    kind = "reduction"

    def __init__(self, in_channels: int, out_channels: int = 1, kernel_size: int = 5,
                 dtype=np.float32):
        if kernel_size % 2 == 0:
            raise ValueError("kernel_size must be odd")
        self.in_channels = int(in_channels)
        self.out_channels = int(out_channels)
        self.kernel_size = int(kernel_size)
        k = self.kernel_size
        self.weight = Tensor(np.zeros((out_channels, in_channels, k, k), dtype=dtype), requires_grad=True)
        self.bias = Tensor(np.zeros(out_channels, dtype=dtype), requires_grad=True)
        self.gamma = Tensor(np.ones(out_channels, dtype=dtype), requires_grad=True)
        self.beta = Tensor(np.zeros(out_channels, dtype=dtype), requires_grad=True)
        self.reset_parameters(np.random.default_rng(0))

    def reset_parameters(self, rng):
        k = self.kernel_size
        fan_in = self.in_channels * k * k
        w = uniform_init(rng, self.out_channels, fan_in, dtype=self.weight.dtype)
        self.weight.data[...] = w.reshape(self.weight.shape)
        self.bias.data[...] = 0
        self.gamma.data[...] = 1
        self.beta.data[...] = 0

    def named_parameters(self):
        return [("weight", self.weight), ("bias", self.bias), ("gamma", self.gamma), ("beta", self.beta)]

    def config(self):
        return {**super().config(), "kernel_size": self.kernel_size}

    def forward(self, x):
        y = ACTIVATIONS["relu"](conv2d_same(x, self.weight, self.bias))
        return batch_norm(y, self.gamma, self.beta)


CELL_TYPES: dict[str, type[Cell]] = {
    ChannelMixCell.kind: ChannelMixCell,
    ReductionCell.kind: ReductionCell,
}


def channel_mix_constructor(is_input, is_output, in_degree, out_degree, layer, input_channel_size):
    return ChannelMixCell(input_channel_size if is_input else in_degree, 1)


def reduction_constructor(is_input, is_output, in_degree, out_degree, layer, input_channel_size):
    return ReductionCell(input_channel_size if is_input else in_degree, 1)


# -- network -------------------------------------------------------------------

class DeepCellDAN(Model):
    """Network whose vertices are cells wired along the edges of ``structure``."""

    kind = "cell"
    activation = "identity"
    init_fanin = "dense"

    def __init__(self, num_classes: int, input_channel_size: int, constructor: CellConstructor,
                 structure: LayeredDag | Dag, seed: int = 0, dtype=np.float32):
        if isinstance(structure, Dag):
            structure = compute_layering(structure)
        if len(structure) == 0:
            raise EmptyGraphError("structure has no vertices")
        self.num_classes = int(num_classes)
        self.input_channel_size = int(input_channel_size)
        self.input_size = self.input_channel_size
        self.structure = structure
        self.seed = int(seed)
        rng = np.random.default_rng(self.seed)
        g = structure.dag
        self.order = [v for layer in structure.layers for v in layer]
        self.cells: dict[int, Cell] = {}
        for v in self.order:
            preds = g.predecessors(v)
            cell = constructor(not preds, g.out_degree(v) == 0, len(preds), g.out_degree(v),
                               structure.layer_of[v], self.input_channel_size)
            expected = (self.input_channel_size if not preds
                        else sum(self.cells[u].out_channels for u in preds))
            if cell.in_channels != expected:
                raise CellArityError(f"cell at vertex {v} declares {cell.in_channels} input "
                                     f"channels, wiring provides {expected}")
            cell.reset_parameters(rng)
            self.cells[v] = cell
        self.sink_vertices = [v for v in self.order if g.out_degree(v) == 0]
        width = sum(self.cells[v].out_channels for v in self.sink_vertices)
        self.readout = MaskedLinear(width, self.num_classes, rng=rng, dtype=dtype, name="readout")

    def maskable_layers(self) -> list[MaskedLinear]:
        return [self.readout]

    def named_parameters(self):
        out = [(f"cell{v}.{n}", p) for v in self.order for n, p in self.cells[v].named_parameters()]
        return out + super().named_parameters()

    def cell_outputs(self, x: Tensor) -> dict[int, Tensor]:
        if x.data.ndim != 4 or x.shape[1] != self.input_channel_size:
            raise ShapeError(f"expected (batch, {self.input_channel_size}, H, W), got {x.shape}")
        g = self.structure.dag
        outs: dict[int, Tensor] = {}
        for v in self.order:
            preds = g.predecessors(v)
            inp = x if not preds else concat([outs[u] for u in preds], axis=1)
            outs[v] = self.cells[v](inp)
        return outs

    def forward(self, x: Tensor) -> Tensor:
        outs = self.cell_outputs(x)
        feats = concat([global_avg_pool(outs[v]) for v in self.sink_vertices], axis=1)
        return self.readout(feats)

    def __repr__(self) -> str:
        return f"DeepCellDAN(num_classes={self.num_classes}, cells={len(self.cells)})"


def build_cell_dan(num_classes: int, input_channel_size: int, constructor: CellConstructor,
                   structure: LayeredDag | Dag, **kwargs) -> DeepCellDAN:
    return DeepCellDAN(num_classes, input_channel_size, constructor, structure, **kwargs)
