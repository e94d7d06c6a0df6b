"""Directed acyclic graphs with longest-path layering.

A :class:`Dag` stays acyclic at all times: :meth:`Dag.add_edge` runs a
DFS from the head back to the tail before inserting.  :func:`compute_layering`
turns a DAG into a :class:`LayeredDag`, where every vertex sits on the layer
given by the length of the longest directed path ending in it.  Layers are
what the network builders compile into weight blocks.
"""
from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from .errors import CycleError, EmptyGraphError, LayerIndexError

__all__ = [
    "Dag",
    "LayeredDag",
    "compute_layering",
    "cross_layer_adjacency",
    "graph_density",
    "topological_order",
]


class Dag:
    """Mutable directed acyclic graph over non-negative integer vertex ids."""

    def __init__(self, edges: Iterable[tuple[int, int]] = (), nodes: Iterable[int] = ()):
        self._succ: dict[int, set[int]] = {}
        self._pred: dict[int, set[int]] = {}
        self._frozen = False
        for v in nodes:
            self.add_node(v)
        for u, v in edges:
            self.add_edge(u, v)

    # -- construction -----------------------------------------------------
    def add_node(self, v: int) -> Dag:
        self._check_mutable()
        v = _as_vertex(v)
        if v not in self._succ:
            self._succ[v] = set()
            self._pred[v] = set()
        return self

    def add_nodes_from(self, vertices: Iterable[int]) -> Dag:
        for v in vertices:
            self.add_node(v)
        return self

    def add_edge(self, u: int, v: int) -> Dag:
        """Insert ``u -> v``; raises :class:`CycleError` if that closes a cycle."""
        self._check_mutable()
        u, v = _as_vertex(u), _as_vertex(v)
        if u == v:
            raise CycleError(f"self-loop ({u}, {v}) is not allowed")
        self.add_node(u)
        self.add_node(v)
        if v in self._succ[u]:
            return self
        if self._reaches(v, u):
            raise CycleError(f"edge ({u}, {v}) would close a directed cycle")
        self._succ[u].add(v)
        self._pred[v].add(u)
        return self

    def add_edges_from(self, edges: Iterable[tuple[int, int]]) -> Dag:
        for u, v in edges:
            self.add_edge(u, v)
        return self

    @classmethod
    def from_edges(cls, edges: Iterable[tuple[int, int]], nodes: Iterable[int] = ()) -> Dag:
        """Bulk constructor: one acyclicity check at the end instead of one per edge.

        Returns a frozen graph.
        """
        g = cls(nodes=nodes)
        for u, v in edges:
            u, v = _as_vertex(u), _as_vertex(v)
            if u == v:
                raise CycleError(f"self-loop ({u}, {v}) is not allowed")
            g.add_node(u)
            g.add_node(v)
            g._succ[u].add(v)
            g._pred[v].add(u)
        topological_order(g)
        return g.freeze()

    def freeze(self) -> Dag:
        self._frozen = True
        return self

    @property
    def frozen(self) -> bool:
        return self._frozen

    def copy(self) -> Dag:
        g = Dag()
        g._succ = {v: set(s) for v, s in self._succ.items()}
        g._pred = {v: set(p) for v, p in self._pred.items()}
        return g

    def _check_mutable(self):
        if self._frozen:
            raise TypeError("graph is frozen")

    def _reaches(self, src: int, dst: int) -> bool:
        stack = [src]
        seen = {src}
        while stack:
            x = stack.pop()
            if x == dst:
                return True
            for y in self._succ[x]:
                if y not in seen:
                    seen.add(y)
                    stack.append(y)
        return False

    # -- queries ----------------------------------------------------------
    @property
    def nodes(self) -> list[int]:
        return sorted(self._succ)

    @property
    def edges(self) -> list[tuple[int, int]]:
        return sorted((u, v) for u, succ in self._succ.items() for v in succ)

    def edge_set(self) -> set[tuple[int, int]]:
        return {(u, v) for u, succ in self._succ.items() for v in succ}

    def successors(self, v: int) -> list[int]:
        return sorted(self._succ[v])

    def predecessors(self, v: int) -> list[int]:
        return sorted(self._pred[v])

    def in_degree(self, v: int) -> int:
        return len(self._pred[v])

    def out_degree(self, v: int) -> int:
        return len(self._succ[v])

    def has_edge(self, u: int, v: int) -> bool:
        return u in self._succ and v in self._succ[u]

    def number_of_nodes(self) -> int:
        return len(self._succ)

    def number_of_edges(self) -> int:
        return sum(len(s) for s in self._succ.values())

    def __len__(self) -> int:
        return len(self._succ)

    def __contains__(self, v) -> bool:
        return v in self._succ

    def __eq__(self, other) -> bool:
        if not isinstance(other, Dag):
            return NotImplemented
        return set(self._succ) == set(other._succ) and self.edge_set() == other.edge_set()

    def __repr__(self) -> str:
        return f"Dag(nodes={self.number_of_nodes()}, edges={self.number_of_edges()})"

    def subgraph(self, vertices: Iterable[int]) -> Dag:
        keep = set(vertices)
        g = Dag(nodes=sorted(keep & set(self._succ)))
        for u, v in self.edges:
            if u in keep and v in keep:
                g._succ[u].add(v)
                g._pred[v].add(u)
        return g


def _as_vertex(v) -> int:
    if isinstance(v, (bool, np.bool_)) or not isinstance(v, (int, np.integer)):
        raise TypeError(f"vertex ids must be integers, got {v!r}")
    v = int(v)
    if v < 0:
        raise ValueError(f"vertex ids must be non-negative, got {v}")
    return v


def topological_order(g: Dag) -> list[int]:
    """Kahn's algorithm, smallest available id first (deterministic)."""
    indeg = {v: g.in_degree(v) for v in g.nodes}
    ready = [v for v, d in indeg.items() if d == 0]
    heapq.heapify(ready)
    order = []
    while ready:
        u = heapq.heappop(ready)
        order.append(u)
        for w in g.successors(u):
            indeg[w] -= 1
            if indeg[w] == 0:
                heapq.heappush(ready, w)
    if len(order) != len(g):
        raise CycleError("graph contains a directed cycle")
    return order


@dataclass(frozen=True)
class LayeredDag:
    """A frozen DAG together with its longest-path layering.

    ``layers[i]`` lists the vertices of layer ``i`` in ascending id order.
    ``roles`` is optional vertex metadata (``"input"``, ``"hidden"``,
    ``"output"``) attached by graph extraction; it is not serialized.
    """

    dag: Dag
    layer_of: Mapping[int, int]
    layers: tuple[tuple[int, ...], ...]
    roles: Mapping[int, str] | None = field(default=None, compare=False)

    @property
    def nodes(self) -> list[int]:
        return self.dag.nodes

    @property
    def edges(self) -> list[tuple[int, int]]:
        return self.dag.edges

    def edge_set(self) -> set[tuple[int, int]]:
        return self.dag.edge_set()

    @property
    def num_layers(self) -> int:
        return len(self.layers)

    def index_in_layer(self, v: int) -> int:
        return self.layers[self.layer_of[v]].index(v)

    def sinks(self) -> list[int]:
        return [v for v in self.nodes if self.dag.out_degree(v) == 0]

    def sources(self) -> list[int]:
        return [v for v in self.nodes if self.dag.in_degree(v) == 0]

    def vertices_with_role(self, role: str) -> list[int]:
        if self.roles is None:
            return []
        return sorted(v for v, r in self.roles.items() if r == role)

    def __len__(self) -> int:
        return len(self.dag)

    def __repr__(self) -> str:
        return (f"LayeredDag(nodes={self.dag.number_of_nodes()}, "
                f"edges={self.dag.number_of_edges()}, layers={[len(l) for l in self.layers]})")


def compute_layering(g: Dag, roles: Mapping[int, str] | None = None) -> LayeredDag:
    """Longest-path layering: sources on layer 0, others at 1 + max(pred layer)."""
    if len(g) == 0:
        raise EmptyGraphError("cannot layer an empty graph")
    g = g.copy().freeze()
    layer_of: dict[int, int] = {}
    for v in topological_order(g):
        preds = g.predecessors(v)
        layer_of[v] = 1 + max(layer_of[u] for u in preds) if preds else 0
    n_layers = max(layer_of.values()) + 1
    buckets: list[list[int]] = [[] for _ in range(n_layers)]
    for v in sorted(layer_of):
        buckets[layer_of[v]].append(v)
    return LayeredDag(g, dict(layer_of), tuple(tuple(b) for b in buckets),
                      dict(roles) if roles is not None else None)


def cross_layer_adjacency(lg: LayeredDag, j: int, i: int) -> np.ndarray:
    """Binary ``(|layer i|, |layer j|)`` matrix of edges from layer ``j`` into layer ``i``."""
    n = lg.num_layers
    if not (0 <= j < i < n):
        raise LayerIndexError(f"need 0 <= j < i < {n}, got j={j}, i={i}")
    src, dst = lg.layers[j], lg.layers[i]
    col = {v: b for b, v in enumerate(src)}
    out = np.zeros((len(dst), len(src)), dtype=np.uint8)
    for a, v in enumerate(dst):
        for u in lg.dag.predecessors(v):
            b = col.get(u)
            if b is not None:
                out[a, b] = 1
    return out


def graph_density(g: Dag | LayeredDag) -> float:
    """Directed density ``|E| / (|V| (|V| - 1))``."""
    if isinstance(g, LayeredDag):
        g = g.dag
    n = g.number_of_nodes()
    if n < 2:
        raise EmptyGraphError(f"density needs at least 2 vertices, got {n}")
    return g.number_of_edges() / (n * (n - 1))

