import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dagnet.errors import SpecError
from dagnet.generators import (GeneratorSpec, generate, generate_newman_watts_strogatz,
                               generate_random_layered_dag, orient_to_dag, ring_lattice)
from dagnet.graph import Dag


def nws(n, k, p, seed=0):
    return generate_newman_watts_strogatz(GeneratorSpec("watts_strogatz_newman", n, k, p, seed))


class TestNewmanWattsStrogatz:
    def test_listing_parameters(self):
        edges = nws(100, 4, 0.5, seed=1)
        assert len(edges) >= 200
        assert {v for e in edges for v in e} == set(range(100))

    def test_no_shortcuts_is_cycle(self):
        assert nws(4, 2, 0.0) == [(0, 1), (0, 3), (1, 2), (2, 3)]

    def test_lattice_matches_networkx(self):
        for n, k in [(10, 4), (7, 2), (12, 6)]:
            ref = nx.watts_strogatz_graph(n, k, 0.0)
            assert set(ring_lattice(n, k)) == {(min(e), max(e)) for e in ref.edges}

    @settings(max_examples=40, deadline=None)
    @given(st.integers(3, 40), st.integers(1, 5), st.floats(0, 1), st.integers(0, 2**32))
    def test_lattice_subset_and_simple(self, n, half_k, p, seed):
        k = 2 * half_k
        if k >= n:
            return
        edges = nws(n, k, p, seed)
        assert set(ring_lattice(n, k)) <= set(edges)
        assert all(u < v for u, v in edges)
        assert len(edges) == len(set(edges))

    def test_shortcut_count_monte_carlo(self):
        # one coin per lattice edge; only saturated endpoints lose their shortcut
        n, k, p = 10, 4, 1.0
        counts = np.array([len(nws(n, k, p, seed)) - n * k // 2 for seed in range(1000)])
        assert counts.min() >= 0
        assert np.all(np.array([len(nws(n, k, p, s)) for s in range(20)]) >= 20)
        assert 0.85 * p * n * k / 2 <= counts.mean() <= p * n * k / 2

    def test_shortcut_mean_tracks_p(self):
        n, k = 60, 4
        for p in (0.1, 0.3):
            counts = [len(nws(n, k, p, seed)) - n * k // 2 for seed in range(400)]
            expected = p * n * k / 2
            # binomial(120, p) with rare collisions against existing shortcuts
            assert abs(np.mean(counts) - expected) < 4 * np.sqrt(expected * (1 - p) / 400) + 0.5

    def test_seed_determinism(self):
        assert nws(50, 4, 0.3, seed=9) == nws(50, 4, 0.3, seed=9)
        assert nws(50, 4, 0.3, seed=9) != nws(50, 4, 0.3, seed=10)

    @pytest.mark.parametrize("n,k,p", [(10, 3, 0.5), (10, 0, 0.5), (10, 10, 0.5), (1, 0, 0.0),
                                       (10, 4, 1.5), (10, 4, -0.1)])
    def test_invalid(self, n, k, p):
        with pytest.raises(SpecError):
            nws(n, k, p)


class TestOrient:
    def test_single(self):
        assert orient_to_dag([(1, 0)]).edges == [(0, 1)]

    def test_four_cycle(self):
        g = orient_to_dag([(0, 1), (1, 2), (2, 3), (3, 0)])
        assert g.edges == [(0, 1), (0, 3), (1, 2), (2, 3)]
        assert nx.is_directed_acyclic_graph(nx.DiGraph(g.edges))

    def test_empty(self):
        g = orient_to_dag([])
        assert isinstance(g, Dag) and len(g) == 0

    def test_self_loop(self):
        with pytest.raises(SpecError):
            orient_to_dag([(2, 2)])

    @given(st.lists(st.tuples(st.integers(0, 30), st.integers(0, 30)).filter(lambda e: e[0] != e[1])))
    def test_always_acyclic(self, edges):
        g = orient_to_dag(edges)
        ref = nx.DiGraph(g.edges)
        assert nx.is_directed_acyclic_graph(ref)
        assert g.edge_set() == {(min(e), max(e)) for e in edges}


class TestRandomLayered:
    def test_two_vertices(self):
        assert generate_random_layered_dag(2, 2, 1.0, seed=0).edges == [(0, 1)]

    def test_complete_six_three(self):
        lg = generate_random_layered_dag(6, 3, 1.0, seed=1)
        assert len(lg.edges) == 2 * 2 + 2 * 2 + 2 * 2
        assert lg.num_layers == 3

    def test_every_non_source_has_predecessor(self):
        for seed in range(20):
            lg = generate_random_layered_dag(6, 3, 0.5, seed=seed)
            for v in lg.nodes:
                if v % 3:
                    assert lg.dag.in_degree(v) >= 1

    @settings(max_examples=50, deadline=None)
    @given(st.integers(2, 80), st.integers(2, 8), st.floats(0.01, 1.0), st.integers(0, 10**6))
    def test_layering_matches_round_robin(self, n, layers, p, seed):
        if n < layers:
            return
        lg = generate_random_layered_dag(n, layers, p, seed)
        assert dict(lg.layer_of) == {v: v % layers for v in range(n)}
        assert lg.num_layers == layers

    def test_seed_determinism(self):
        a = generate_random_layered_dag(40, 4, 0.3, seed=5)
        b = generate_random_layered_dag(40, 4, 0.3, seed=5)
        assert a.edges == b.edges

    @pytest.mark.parametrize("n,layers,p", [(3, 4, 0.5), (4, 1, 0.5), (4, 2, 0.0), (4, 2, 1.2)])
    def test_invalid(self, n, layers, p):
        with pytest.raises(SpecError):
            generate_random_layered_dag(n, layers, p, seed=0)


def test_generate_dispatch():
    lg = generate(GeneratorSpec("watts_strogatz_newman", 20, 4, 0.2, seed=3))
    assert len(lg) == 20
    assert all(u < v for u, v in lg.edges)
    lg = generate(GeneratorSpec("random_layered_dag", 12, p=0.5, seed=3, layers=3))
    assert lg.num_layers == 3
    with pytest.raises(SpecError):
        generate(GeneratorSpec("erdos", 5))
