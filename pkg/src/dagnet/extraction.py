"""Turn a model back into a graph.

At neuron granularity every input feature, hidden neuron and output neuron
becomes a vertex and every surviving connection an edge.  Hidden neurons keep
the ids they had at construction (the source graph's ids for a DAN,
``(layer, position)`` enumeration for an FFN); input features follow them and
output neurons come last.  At layer granularity each input, hidden layer and
output group is one vertex.

A probe input is pushed through the model once before extraction to make
sure the probe shape fits the model.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .cells import DeepCellDAN
from .errors import (ExtractionTooLargeError, ProbeShapeError, ShapeError,
                     UnsupportedModelError)
from .graph import Dag, LayeredDag, compute_layering, graph_density
from .models import MaskedDeepDAN, MaskedDeepFFN, build_dan
from .nn import MaskedLinear
from .tensor import Tensor, no_grad

__all__ = [
    "ExtractionConfig",
    "GraphTransform",
    "transform",
    "hidden_subgraph",
    "RoundTripResult",
    "roundtrip_check",
    "GraphStats",
    "graph_stats",
    "DEFAULT_MAX_EDGES",
]

DEFAULT_MAX_EDGES = 10_000_000


@dataclass(frozen=True)
class ExtractionConfig:
    probe_shape: tuple[int, ...]
    granularity: str = "neuron"
    edge_rule: str = "mask_nonzero"
    epsilon: float = 0.0
    max_edges: int = DEFAULT_MAX_EDGES
    force: bool = False
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "probe_shape", tuple(int(s) for s in self.probe_shape))
        if not self.probe_shape or any(s < 1 for s in self.probe_shape):
            raise ProbeShapeError(f"probe shape must be non-empty and positive, got {self.probe_shape}")
        if self.granularity not in ("neuron", "layer"):
            raise ValueError(f"granularity must be 'neuron' or 'layer', got {self.granularity!r}")
        if self.edge_rule not in ("mask_nonzero", "weight_above"):
            raise ValueError(f"edge_rule must be 'mask_nonzero' or 'weight_above', got {self.edge_rule!r}")
        if self.epsilon < 0:
            raise ValueError(f"epsilon must be non-negative, got {self.epsilon}")


def _connections(layer: MaskedLinear, cfg: ExtractionConfig) -> np.ndarray:
    """Boolean ``(out, in)`` matrix of connections that count as edges.

    ``weight_above`` looks at raw weights and ignores the mask, so it agrees
    with ``mask_nonzero`` only once the mask has been applied.
    """
    if cfg.edge_rule == "mask_nonzero":
        return layer.mask != 0
    return np.abs(layer.weight.data) > cfg.epsilon


def _run_probe(model, cfg: ExtractionConfig) -> None:
    shape = cfg.probe_shape
    if isinstance(model, DeepCellDAN):
        if len(shape) != 3 or shape[0] != model.input_channel_size:
            raise ProbeShapeError(f"cell network needs a (C={model.input_channel_size}, H, W) probe, got {shape}")
    elif int(np.prod(shape)) != model.input_size:
        raise ProbeShapeError(f"probe shape {shape} flattens to {int(np.prod(shape))}, "
                              f"model expects {model.input_size}")
    rng = np.random.default_rng(cfg.seed)
    probe = Tensor(rng.standard_normal((1, *shape)).astype(model.dtype))
    try:
        with no_grad():
            out = model(probe)
    except ShapeError as exc:
        raise ProbeShapeError(str(exc)) from exc
    if not np.all(np.isfinite(out.data)):
        raise ProbeShapeError("probe forward pass produced non-finite output")


def _neuron_groups(model):
    """Return ``(hidden_ids_per_layer, input_ids, output_ids, blocks)``.

    ``blocks`` lists ``(layer, source_ids, target_ids)``.
    """
    if isinstance(model, MaskedDeepDAN):
        s = model.structure
        hidden = [list(layer) for layer in s.layers]
        base = max(s.nodes) + 1
        inputs = list(range(base, base + model.input_size))
        outputs = list(range(base + model.input_size, base + model.input_size + model.output_size))
        blocks = [(model.input_block, inputs, hidden[0])]
        for (j, i), block in sorted(model.blocks.items(), key=lambda kv: (kv[0][1], kv[0][0])):
            blocks.append((block, hidden[j], hidden[i]))
        blocks.append((model.output_block, model.sink_vertices, outputs))
        return hidden, inputs, outputs, blocks
    if isinstance(model, MaskedDeepFFN):
        hidden, start = [], 0
        for h in model.hidden_sizes:
            hidden.append(list(range(start, start + h)))
            start += h
        inputs = list(range(start, start + model.input_size))
        outputs = list(range(start + model.input_size, start + model.input_size + model.output_size))
        chain = [inputs, *hidden, outputs]
        blocks = [(layer, chain[k], chain[k + 1]) for k, layer in enumerate(model.maskable_layers())]
        return hidden, inputs, outputs, blocks
    raise UnsupportedModelError(f"neuron-level extraction is not defined for {type(model).__name__}")


def _neuron_graph(model, cfg: ExtractionConfig) -> LayeredDag:
    hidden, inputs, outputs, blocks = _neuron_groups(model)
    conns = [(_connections(layer, cfg), src, dst) for layer, src, dst in blocks]
    n_edges = sum(int(np.count_nonzero(c)) for c, _, _ in conns)
    if n_edges > cfg.max_edges and not cfg.force:
        raise ExtractionTooLargeError(f"extraction would create {n_edges} edges (cap {cfg.max_edges}); "
                                      "raise the cap or force it")
    edges = []
    for c, src, dst in conns:
        src_a, dst_a = np.asarray(src), np.asarray(dst)
        rows, cols = np.nonzero(c)
        edges.extend(zip(src_a[cols].tolist(), dst_a[rows].tolist()))
    roles = {v: "hidden" for layer in hidden for v in layer}
    roles.update({v: "input" for v in inputs})
    roles.update({v: "output" for v in outputs})
    return compute_layering(Dag.from_edges(edges, nodes=sorted(roles)), roles)


def _layer_graph(model, cfg: ExtractionConfig) -> LayeredDag:
    if isinstance(model, DeepCellDAN):
        s = model.structure
        roles = {v: "cell" for v in s.nodes}
        return compute_layering(Dag.from_edges(s.edges, nodes=s.nodes), roles)
    if isinstance(model, MaskedDeepFFN):
        layers = model.maskable_layers()
        out = len(layers)
        edges = [(k, k + 1) for k, layer in enumerate(layers) if _connections(layer, cfg).any()]
    elif isinstance(model, MaskedDeepDAN):
        out = model.num_hidden_layers + 1
        edges = []
        if _connections(model.input_block, cfg).any():
            edges.append((0, 1))
        for (j, i), block in model.blocks.items():
            if _connections(block, cfg).any():
                edges.append((1 + j, 1 + i))
        used = _connections(model.output_block, cfg).any(axis=0)
        layer_of = model.structure.layer_of
        for col, v in enumerate(model.sink_vertices):
            if used[col]:
                edges.append((1 + layer_of[v], out))
    else:
        raise UnsupportedModelError(f"cannot extract a graph from {type(model).__name__}")
    roles = {0: "input", out: "output", **{k: "hidden" for k in range(1, out)}}
    return compute_layering(Dag.from_edges(sorted(set(edges)), nodes=range(out + 1)), roles)


def transform(model, config: ExtractionConfig) -> LayeredDag:
    """Extract the connectivity of ``model`` as a layered DAG.  Read-only."""
    if not hasattr(model, "maskable_layers") or not list(model.maskable_layers()):
        raise UnsupportedModelError(f"{type(model).__name__} has no maskable layers")
    _run_probe(model, config)
    if config.granularity == "layer":
        return _layer_graph(model, config)
    return _neuron_graph(model, config)


class GraphTransform:
    """Callable wrapper: ``GraphTransform(probe).transform(model)``.

    ``probe`` is either a shape without batch dimension or an example input
    array whose first axis is the batch axis.
    """

    def __init__(self, probe, granularity: str = "neuron", edge_rule: str = "mask_nonzero",
                 epsilon: float = 0.0, max_edges: int = DEFAULT_MAX_EDGES, force: bool = False):
        if isinstance(probe, (np.ndarray, Tensor)):
            shape = tuple(np.shape(probe.data if isinstance(probe, Tensor) else probe))[1:]
        else:
            shape = tuple(probe)
        self.config = ExtractionConfig(shape, granularity, edge_rule, epsilon, max_edges, force)

    def transform(self, model) -> LayeredDag:
        return transform(model, self.config)

    __call__ = transform


def hidden_subgraph(g: LayeredDag) -> Dag:
    """Restrict an extracted neuron graph to its hidden vertices."""
    if g.roles is None:
        raise ValueError("graph carries no vertex roles; was it produced by transform()?")
    return g.dag.subgraph(g.vertices_with_role("hidden"))


@dataclass
class RoundTripResult:
    ok: bool
    missing: list[tuple[int, int]] = field(default_factory=list)
    extra: list[tuple[int, int]] = field(default_factory=list)

    def __bool__(self) -> bool:
        return self.ok

    def to_dict(self) -> dict:
        return {"ok": self.ok, "missing": [list(e) for e in self.missing],
                "extra": [list(e) for e in self.extra]}


def roundtrip_check(structure: LayeredDag | Dag, input_size: int, output_size: int,
                    model=None) -> RoundTripResult:
    """Build a DAN from ``structure`` (unless ``model`` is given), extract it, compare edges."""
    if isinstance(structure, Dag):
        structure = compute_layering(structure)
    if model is None:
        model = build_dan(input_size, output_size, structure)
    g = transform(model, ExtractionConfig((model.input_size,), "neuron", "mask_nonzero"))
    got = hidden_subgraph(g).edge_set()
    want = structure.edge_set()
    missing, extra = sorted(want - got), sorted(got - want)
    return RoundTripResult(not missing and not extra, missing, extra)


@dataclass(frozen=True)
class GraphStats:
    num_nodes: int
    num_edges: int
    density: float | None
    num_layers: int
    layer_sizes: list[int]
    max_path_length: int

    def to_dict(self) -> dict:
        return {"nodes": self.num_nodes, "edges": self.num_edges, "density": self.density,
                "layers": self.num_layers, "layer_sizes": list(self.layer_sizes),
                "max_path_length": self.max_path_length}


def graph_stats(g: LayeredDag | Dag) -> GraphStats:
    """Vertex and edge counts, directed density, layer histogram, longest path."""
    dag = g.dag if isinstance(g, LayeredDag) else g
    if len(dag) == 0:
        return GraphStats(0, 0, None, 0, [], 0)
    lg = g if isinstance(g, LayeredDag) else compute_layering(g)
    dens = graph_density(dag) if len(dag) >= 2 else None
    sizes = [len(layer) for layer in lg.layers]
    return GraphStats(len(dag), dag.number_of_edges(), dens, len(sizes), sizes, len(sizes) - 1)
