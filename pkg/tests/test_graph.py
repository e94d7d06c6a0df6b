import itertools

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import dags, layered, longest_path_oracle, random_dag
from dagnet.errors import CycleError, EmptyGraphError, LayerIndexError
from dagnet.graph import (Dag, compute_layering, cross_layer_adjacency, graph_density,
                          topological_order)


class TestAddEdge:
    def test_single_edge(self):
        g = Dag().add_edge(0, 1)
        assert g.edges == [(0, 1)]
        assert g.nodes == [0, 1]

    def test_cycle_closure_rejected(self):
        g = Dag([(0, 1), (1, 2)])
        with pytest.raises(CycleError):
            g.add_edge(2, 0)
        assert g.edges == [(0, 1), (1, 2)]

    def test_idempotent(self):
        g = Dag().add_edge(0, 1).add_edge(0, 1)
        assert g.number_of_edges() == 1

    def test_self_loop(self):
        with pytest.raises(CycleError):
            Dag().add_edge(3, 3)

    def test_rejects_negative_and_non_integer_ids(self):
        with pytest.raises(ValueError):
            Dag().add_edge(-1, 2)
        with pytest.raises(TypeError):
            Dag().add_edge("a", 2)

    def test_frozen_graph_is_immutable(self):
        g = Dag([(0, 1)]).freeze()
        with pytest.raises(TypeError):
            g.add_edge(1, 2)

    def test_from_edges_detects_cycle(self):
        with pytest.raises(CycleError):
            Dag.from_edges([(0, 1), (1, 2), (2, 0)])

    def test_incremental_check_matches_networkx(self, rng):
        for _ in range(50):
            g, ref = Dag(), nx.DiGraph()
            for _ in range(40):
                u, v = (int(x) for x in rng.integers(0, 10, 2))
                if u == v:
                    continue
                ref.add_edge(u, v)
                acyclic = nx.is_directed_acyclic_graph(ref)
                if not acyclic:
                    ref.remove_edge(u, v)
                    with pytest.raises(CycleError):
                        g.add_edge(u, v)
                else:
                    g.add_edge(u, v)
            assert g.edge_set() == set(ref.edges)


class TestLayering:
    def test_chain(self):
        lg = layered([(0, 1), (1, 2)])
        assert lg.layers == ((0,), (1,), (2,))

    def test_skip_graph(self):
        lg = layered([(0, 2), (1, 2), (0, 1)])
        assert dict(lg.layer_of) == {0: 0, 1: 1, 2: 2}

    def test_star(self):
        lg = layered([(0, 1), (0, 2), (0, 3)])
        assert lg.layers == ((0,), (1, 2, 3))

    def test_empty(self):
        with pytest.raises(EmptyGraphError):
            compute_layering(Dag())

    def test_isolated_vertex_on_layer_zero(self):
        lg = layered([(0, 1)], nodes=[5])
        assert lg.layer_of[5] == 0
        assert lg.layers[0] == (0, 5)

    @settings(max_examples=60, deadline=None)
    @given(dags(max_n=200 // 4))
    def test_soundness_and_partition(self, g):
        if len(g) == 0:
            return
        lg = compute_layering(g)
        assert all(lg.layer_of[u] < lg.layer_of[v] for u, v in g.edges)
        flat = [v for layer in lg.layers for v in layer]
        assert sorted(flat) == g.nodes and len(flat) == len(set(flat))
        assert all(list(layer) == sorted(layer) for layer in lg.layers)
        for v in g.nodes:
            assert (lg.layer_of[v] == 0) == (g.in_degree(v) == 0)

    def test_soundness_large(self, rng):
        for n in (100, 150, 200):
            g = random_dag(rng, n, p=0.05)
            lg = compute_layering(g)
            assert all(lg.layer_of[u] < lg.layer_of[v] for u, v in g.edges)

    @settings(max_examples=80, deadline=None)
    @given(dags(max_n=50))
    def test_minimality_against_relaxation_oracle(self, g):
        if len(g) == 0:
            return
        assert dict(compute_layering(g).layer_of) == longest_path_oracle(g)

    def test_minimality_against_path_enumeration(self, rng):
        # exhaustive path enumeration on small graphs
        for _ in range(30):
            g = random_dag(rng, 9, p=0.4)
            ref = nx.DiGraph(g.edges)
            ref.add_nodes_from(g.nodes)
            lg = compute_layering(g)
            for v in g.nodes:
                longest = 0
                for s in g.nodes:
                    for path in nx.all_simple_paths(ref, s, v):
                        longest = max(longest, len(path) - 1)
                assert lg.layer_of[v] == longest

    def test_determinism_over_insertion_order(self, rng):
        g = random_dag(rng, 40, p=0.2)
        edges = g.edges
        ref = compute_layering(g)
        for _ in range(5):
            shuffled = [edges[i] for i in rng.permutation(len(edges))]
            other = compute_layering(Dag(shuffled, nodes=reversed(g.nodes)))
            assert other.layers == ref.layers
            assert dict(other.layer_of) == dict(ref.layer_of)

    def test_topological_order_is_valid(self, rng):
        g = random_dag(rng, 60, p=0.1)
        pos = {v: i for i, v in enumerate(topological_order(g))}
        assert all(pos[u] < pos[v] for u, v in g.edges)


class TestCrossLayerAdjacency:
    def test_chain(self):
        lg = layered([(0, 1), (1, 2)])
        np.testing.assert_array_equal(cross_layer_adjacency(lg, 0, 1), [[1]])

    def test_skip(self):
        lg = layered([(0, 2), (1, 2), (0, 1)])
        np.testing.assert_array_equal(cross_layer_adjacency(lg, 0, 2), [[1]])
        np.testing.assert_array_equal(cross_layer_adjacency(lg, 0, 1), [[1]])
        np.testing.assert_array_equal(cross_layer_adjacency(lg, 1, 2), [[1]])

    @pytest.mark.parametrize("j,i", [(1, 1), (2, 1), (-1, 1), (0, 3)])
    def test_bad_indices(self, j, i):
        lg = layered([(0, 1), (1, 2)])
        with pytest.raises(LayerIndexError):
            cross_layer_adjacency(lg, j, i)

    def test_matches_networkx_adjacency(self, rng):
        for _ in range(10):
            g = random_dag(rng, 25, p=0.25)
            lg = compute_layering(g)
            ref = nx.DiGraph(g.edges)
            ref.add_nodes_from(g.nodes)
            order = list(itertools.chain.from_iterable(lg.layers))
            A = nx.to_numpy_array(ref, nodelist=order, dtype=np.uint8)  # A[u, v] = edge u -> v
            offsets = np.cumsum([0] + [len(l) for l in lg.layers])
            for i in range(lg.num_layers):
                for j in range(i):
                    want = A[offsets[j]:offsets[j + 1], offsets[i]:offsets[i + 1]].T
                    np.testing.assert_array_equal(cross_layer_adjacency(lg, j, i), want)


class TestDensity:
    def test_two_vertices(self):
        assert graph_density(Dag([(0, 1)])) == 0.5

    def test_complete_dag_on_three(self):
        assert graph_density(Dag([(0, 1), (0, 2), (1, 2)])) == pytest.approx(3 / 6)

    def test_edgeless(self):
        assert graph_density(Dag(nodes=range(5))) == 0.0

    @pytest.mark.parametrize("nodes", [[], [0]])
    def test_too_small(self, nodes):
        with pytest.raises(EmptyGraphError):
            graph_density(Dag(nodes=nodes))

    @given(st.integers(2, 30), st.data())
    def test_matches_networkx(self, n, data):
        edges = data.draw(st.sets(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1))
                                  .filter(lambda e: e[0] < e[1])))
        g = Dag(edges, nodes=range(n))
        ref = nx.DiGraph(list(edges))
        ref.add_nodes_from(range(n))
        assert graph_density(g) == pytest.approx(nx.density(ref))
