"""Network families compiled from layer-size lists or layered DAGs.

:class:`MaskedDeepFFN` chains masked linear layers.  :class:`MaskedDeepDAN`
places one neuron per graph vertex and one weight block per pair of layers
that the graph connects, so skip edges become skip blocks::

    y_0 = act(W_in x + b_in)
    y_i = act(sum_{j < i} (W_{j->i} * M_{j->i}) y_j + b_i)      i >= 1
    logits = W_out [sink neurons] + b_out

The raw input only reaches layer 0.  The bias of layer ``i`` lives on the
adjacent block ``(i-1) -> i``, which always exists under longest-path
layering.
"""
from __future__ import annotations

from typing import Iterator, Sequence

import numpy as np

from .errors import EmptyGraphError, ShapeError, SizeError
from .graph import Dag, LayeredDag, compute_layering, cross_layer_adjacency
from .nn import MaskedLinear
from .tensor import ACTIVATIONS, Tensor, concat, no_grad, take

__all__ = [
    "Model",
    "MaskedDeepFFN",
    "MaskedDeepDAN",
    "build_ffn",
    "build_dan",
    "maskable_layers",
    "chain_of_cliques",
]


class Model:
    """Shared plumbing: parameter listing, gradients, inference helpers."""

    kind = ""
    input_size: int
    activation: str
    seed: int
    init_fanin: str

    def forward(self, x: Tensor) -> Tensor:  # pragma: no cover - abstract
        raise NotImplementedError

    def __call__(self, x) -> Tensor:
        if not isinstance(x, Tensor):
            x = Tensor(np.asarray(x, dtype=self.dtype))
        return self.forward(x)

    def maskable_layers(self) -> list[MaskedLinear]:  # pragma: no cover - abstract
        raise NotImplementedError

    def named_parameters(self) -> list[tuple[str, Tensor]]:
        out = []
        for layer in self.maskable_layers():
            out.append((f"{layer.name}.weight", layer.weight))
            if layer.bias is not None:
                out.append((f"{layer.name}.bias", layer.bias))
        return out

    def parameters(self) -> list[Tensor]:
        return [p for _, p in self.named_parameters()]

    def num_parameters(self) -> int:
        return sum(p.size for p in self.parameters())

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.grad = None

    def predict(self, x) -> np.ndarray:
        with no_grad():
            return self(x).data

    @property
    def dtype(self):
        return self.maskable_layers()[0].weight.dtype

    def _act(self, t: Tensor) -> Tensor:
        return ACTIVATIONS[self.activation](t)

    def _flatten(self, x: Tensor) -> Tensor:
        if x.data.ndim > 2:
            x = x.reshape(x.shape[0], -1)
        if x.data.ndim != 2 or x.shape[1] != self.input_size:
            raise ShapeError(f"expected input (batch, {self.input_size}), got {x.shape}")
        return x


def _check_activation(name: str) -> str:
    if name not in ACTIVATIONS:
        raise ValueError(f"unknown activation {name!r}; choose from {sorted(ACTIVATIONS)}")
    return name


class MaskedDeepFFN(Model):
    """Feed-forward stack ``in -> h_1 -> ... -> h_L -> out`` of masked layers."""

    kind = "ffn"

    def __init__(self, input_size: int, output_size: int, hidden_sizes: Sequence[int] = (),
                 activation: str = "relu", seed: int = 0, init_fanin: str = "dense",
                 dtype=np.float32):
        sizes = [input_size, *hidden_sizes, output_size]
        if any(int(s) < 1 for s in sizes):
            raise SizeError(f"all layer sizes must be >= 1, got {sizes}")
        self.input_size = int(input_size)
        self.output_size = int(output_size)
        self.hidden_sizes = [int(h) for h in hidden_sizes]
        self.activation = _check_activation(activation)
        self.seed = int(seed)
        self.init_fanin = init_fanin
        rng = np.random.default_rng(self.seed)
        self.hidden = [
            MaskedLinear(sizes[i], sizes[i + 1], rng=rng, init_fanin=init_fanin,
                         dtype=dtype, name=f"hidden{i}")
            for i in range(len(self.hidden_sizes))
        ]
        self.output_layer = MaskedLinear(sizes[-2], sizes[-1], rng=rng, init_fanin=init_fanin,
                                         dtype=dtype, name="output")

    def maskable_layers(self) -> list[MaskedLinear]:
        return [*self.hidden, self.output_layer]

    def hidden_activations(self, x: Tensor) -> list[Tensor]:
        h, out = self._flatten(x), []
        for layer in self.hidden:
            h = self._act(layer(h))
            out.append(h)
        return out

    def forward(self, x: Tensor) -> Tensor:
        hs = self.hidden_activations(x)
        return self.output_layer(hs[-1] if hs else self._flatten(x))

    def __repr__(self) -> str:
        return f"MaskedDeepFFN({self.input_size}, {self.output_size}, {self.hidden_sizes})"


class MaskedDeepDAN(Model):
    """Deep directed acyclic network: one neuron per vertex of ``structure``."""

    kind = "dan"

    def __init__(self, input_size: int, output_size: int, structure: LayeredDag | Dag,
                 activation: str = "relu", seed: int = 0, init_fanin: str = "dense",
                 dtype=np.float32):
        if isinstance(structure, Dag):
            structure = compute_layering(structure)
        if len(structure) == 0:
            raise EmptyGraphError("structure has no vertices")
        if input_size < 1 or output_size < 1:
            raise SizeError(f"input and output sizes must be >= 1, got {input_size}, {output_size}")
        self.input_size = int(input_size)
        self.output_size = int(output_size)
        self.structure = structure
        self.activation = _check_activation(activation)
        self.seed = int(seed)
        self.init_fanin = init_fanin
        self.layer_sizes = [len(layer) for layer in structure.layers]
        rng = np.random.default_rng(self.seed)
        kw = dict(rng=rng, init_fanin=init_fanin, dtype=dtype)

        self.input_block = MaskedLinear(self.input_size, self.layer_sizes[0], name="input", **kw)
        self.blocks: dict[tuple[int, int], MaskedLinear] = {}
        for i in range(1, structure.num_layers):
            for j in range(i):
                adj = cross_layer_adjacency(structure, j, i)
                if adj.any():
                    self.blocks[(j, i)] = MaskedLinear(
                        self.layer_sizes[j], self.layer_sizes[i], bias=(j == i - 1),
                        mask=adj, name=f"{j}->{i}", **kw)
            if (i - 1, i) not in self.blocks:
                raise ValueError(f"layer {i} has no block from layer {i - 1}; structure is not longest-path layered")

        # sinks ordered by (layer, position in layer)
        sinks = set(structure.sinks())
        self.sink_vertices = [v for layer in structure.layers for v in layer if v in sinks]
        self._sink_index = [
            (li, np.array([a for a, v in enumerate(layer) if v in sinks], dtype=np.intp))
            for li, layer in enumerate(structure.layers)
        ]
        self._sink_index = [(li, idx) for li, idx in self._sink_index if idx.size]
        self.output_block = MaskedLinear(len(self.sink_vertices), self.output_size,
                                         name="output", **kw)

    @property
    def num_hidden_layers(self) -> int:
        return len(self.layer_sizes)

    def incoming_blocks(self, i: int) -> list[tuple[int, MaskedLinear]]:
        return [(j, self.blocks[(j, i)]) for j in range(i) if (j, i) in self.blocks]

    def maskable_layers(self) -> list[MaskedLinear]:
        ordered = [self.blocks[k] for k in sorted(self.blocks, key=lambda k: (k[1], k[0]))]
        return [self.input_block, *ordered, self.output_block]

    def hidden_activations(self, x: Tensor) -> list[Tensor]:
        x = self._flatten(x)
        ys = [self._act(self.input_block(x))]
        for i in range(1, self.num_hidden_layers):
            pre = None
            for j, block in self.incoming_blocks(i):
                z = block(ys[j])
                pre = z if pre is None else pre + z
            ys.append(self._act(pre))
        return ys

    def forward(self, x: Tensor) -> Tensor:
        ys = self.hidden_activations(x)
        feats = concat([take(ys[li], idx, axis=1) for li, idx in self._sink_index], axis=1)
        return self.output_block(feats)

    def __repr__(self) -> str:
        return (f"MaskedDeepDAN({self.input_size}, {self.output_size}, layers={self.layer_sizes}, "
                f"blocks={len(self.blocks)})")


def build_ffn(input_size: int, output_size: int, hidden_sizes: Sequence[int], **kwargs) -> MaskedDeepFFN:
    return MaskedDeepFFN(input_size, output_size, hidden_sizes, **kwargs)


def build_dan(input_size: int, output_size: int, structure: LayeredDag | Dag, **kwargs) -> MaskedDeepDAN:
    return MaskedDeepDAN(input_size, output_size, structure, **kwargs)


def maskable_layers(model) -> Iterator[MaskedLinear]:
    """Yield every masked layer of ``model`` in a deterministic order.

    FFN: input to output.  DAN: input block, then blocks ``(j -> i)`` sorted by
    ``(i, j)``, then the output block.  Cell networks: the readout.
    """
    yield from model.maskable_layers()


def chain_of_cliques(sizes: Sequence[int]) -> LayeredDag:
    """Complete bipartite links between consecutive layers of the given widths.

    Vertex ids are assigned layer by layer, so the DAN neuron order matches an
    FFN with the same hidden sizes.
    """
    if not sizes or any(s < 1 for s in sizes):
        raise SizeError(f"layer widths must be >= 1, got {list(sizes)}")
    ids, start = [], 0
    for s in sizes:
        ids.append(list(range(start, start + s)))
        start += s
    edges = [(u, v) for a, b in zip(ids, ids[1:]) for u in a for v in b]
    return compute_layering(Dag.from_edges(edges, nodes=range(start)))
