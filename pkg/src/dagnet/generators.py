"""Seeded samplers for graph design spaces.

All randomness comes from :func:`numpy.random.default_rng`, i.e. the PCG64
generator, seeded with the caller's integer seed.  Draw order is fixed, so a
seed reproduces the same edge set on any platform for a given numpy release.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Literal

import numpy as np

from .errors import SpecError
from .graph import Dag, LayeredDag, compute_layering

__all__ = [
    "GeneratorSpec",
    "generate",
    "generate_newman_watts_strogatz",
    "generate_random_layered_dag",
    "orient_to_dag",
    "ring_lattice",
]


@dataclass(frozen=True)
class GeneratorSpec:
    kind: Literal["watts_strogatz_newman", "random_layered_dag"]
    n: int
    k: int = 2
    p: float = 0.0
    seed: int = 0
    layers: int = 2

    def validate(self) -> None:
        if self.kind not in ("watts_strogatz_newman", "random_layered_dag"):
            raise SpecError(f"unknown generator kind {self.kind!r}")
        if self.n < 2:
            raise SpecError(f"n must be >= 2, got {self.n}")
        if not 0.0 <= self.p <= 1.0:
            raise SpecError(f"probability must lie in [0, 1], got {self.p}")
        if not 0 <= self.seed < 2**64:
            raise SpecError("seed must be a 64-bit unsigned integer")
        if self.kind == "watts_strogatz_newman":
            if not 0 < self.k < self.n:
                raise SpecError(f"need 0 < k < n, got k={self.k}, n={self.n}")
            if self.k % 2:
                raise SpecError(f"k must be even, got {self.k}")
        else:
            if self.layers < 2 or self.n < self.layers:
                raise SpecError(f"need layers >= 2 and n >= layers, got n={self.n}, layers={self.layers}")
            if not 0.0 < self.p <= 1.0:
                raise SpecError(f"edge probability must lie in (0, 1], got {self.p}")


def ring_lattice(n: int, k: int) -> list[tuple[int, int]]:
    """Each vertex joined to its ``k // 2`` clockwise neighbours on a ring."""
    out = set()
    for u in range(n):
        for j in range(1, k // 2 + 1):
            v = (u + j) % n
            out.add((min(u, v), max(u, v)))
    return sorted(out)


def generate_newman_watts_strogatz(spec: GeneratorSpec) -> list[tuple[int, int]]:
    """Ring lattice plus random shortcuts; lattice edges are never removed.

    For every lattice edge ``(u, v)`` (in lattice order) a coin with bias ``p``
    is flipped; on success a shortcut from ``u`` to a uniformly drawn vertex
    that is neither ``u`` nor already adjacent to it is added.  A saturated
    ``u`` (degree ``n - 1``) gets no shortcut.

    Returns sorted undirected edges as ``(min, max)`` pairs.
    """
    if spec.kind != "watts_strogatz_newman":
        raise SpecError(f"expected kind 'watts_strogatz_newman', got {spec.kind!r}")
    spec.validate()
    n, k, p = spec.n, spec.k, spec.p
    rng = np.random.default_rng(spec.seed)
    lattice = [(u, (u + j) % n) for j in range(1, k // 2 + 1) for u in range(n)]
    adj: list[set[int]] = [set() for _ in range(n)]
    for u, v in lattice:
        adj[u].add(v)
        adj[v].add(u)
    for u, _ in lattice:
        if rng.random() >= p:
            continue
        if len(adj[u]) >= n - 1:
            continue
        while True:
            w = int(rng.integers(n))
            if w != u and w not in adj[u]:
                break
        adj[u].add(w)
        adj[w].add(u)
    return sorted({(min(u, v), max(u, v)) for u in range(n) for v in adj[u]})


def orient_to_dag(edges: Iterable[tuple[int, int]], nodes: Iterable[int] = ()) -> Dag:
    """Orient every undirected edge from its lower id to its higher id."""
    directed = []
    for u, v in edges:
        if u == v:
            raise SpecError(f"self-loop {{{u}, {v}}} cannot be oriented")
        directed.append((min(u, v), max(u, v)))
    g = Dag.from_edges(directed, nodes=nodes)
    return Dag(g.edges, g.nodes)


def generate_random_layered_dag(n: int, layers: int, p_edge: float, seed: int) -> LayeredDag:
    """Sample a layered DAG with ``n`` vertices spread round-robin over ``layers``.

    Vertex ``v`` is placed on layer ``v % layers``.  Every pair ``(u, v)`` with
    ``u`` on a strictly lower layer is joined with probability ``p_edge``.  A
    vertex on layer ``i > 0`` that received no predecessor on layer ``i - 1``
    gets one drawn uniformly from that layer, which pins the longest-path
    layering to the round-robin assignment.
    """
    spec = GeneratorSpec("random_layered_dag", n=n, p=p_edge, seed=seed, layers=layers)
    spec.validate()
    rng = np.random.default_rng(seed)
    layer_of = {v: v % layers for v in range(n)}
    by_layer = [[v for v in range(n) if layer_of[v] == i] for i in range(layers)]
    edges = []
    for v in range(n):
        lv = layer_of[v]
        if lv == 0:
            continue
        has_prev = False
        for u in range(n):
            if layer_of[u] < lv and rng.random() < p_edge:
                edges.append((u, v))
                has_prev |= layer_of[u] == lv - 1
        if not has_prev:
            prev = by_layer[lv - 1]
            edges.append((prev[int(rng.integers(len(prev)))], v))
    return compute_layering(Dag.from_edges(edges, nodes=range(n)))


def generate(spec: GeneratorSpec) -> LayeredDag:
    """Dispatch on ``spec.kind`` and return a layered DAG."""
    spec.validate()
    if spec.kind == "watts_strogatz_newman":
        edges = generate_newman_watts_strogatz(spec)
        return compute_layering(orient_to_dag(edges, nodes=range(spec.n)))
    return generate_random_layered_dag(spec.n, spec.layers, spec.p, spec.seed)
