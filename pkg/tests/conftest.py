import numpy as np
import pytest
from hypothesis import strategies as st

from dagnet.cells import build_cell_dan, channel_mix_constructor
from dagnet.generators import generate_random_layered_dag
from dagnet.graph import Dag, compute_layering
from dagnet.models import MaskedDeepFFN, build_dan, maskable_layers
from dagnet.pruning import recompute_mask
from dagnet.tensor import Tensor, no_grad, softmax_cross_entropy

ACCEPTANCE_RESULTS: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_RESULTS:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_dag(rng, n, p=0.3):
    """Random DAG with shuffled labels so ids do not follow topological order."""
    perm = rng.permutation(n)
    edges = [(int(perm[a]), int(perm[b])) for a in range(n) for b in range(a + 1, n) if rng.random() < p]
    return Dag(edges, nodes=range(n))


@st.composite
def dags(draw, max_n=30):
    n = draw(st.integers(1, max_n))
    perm = draw(st.permutations(range(n)))
    pairs = [(a, b) for a in range(n) for b in range(a + 1, n)]
    keep = draw(st.lists(st.booleans(), min_size=len(pairs), max_size=len(pairs)))
    edges = [(perm[a], perm[b]) for (a, b), k in zip(pairs, keep) if k]
    return Dag(edges, nodes=range(n))


def longest_path_oracle(g: Dag) -> dict:
    """Bellman-Ford style relaxation: |V| sweeps over the edge list, no topological order."""
    dist = {v: 0 for v in g.nodes}
    edges = g.edges
    for _ in range(len(dist)):
        changed = False
        for u, v in edges:
            if dist[u] + 1 > dist[v]:
                dist[v] = dist[u] + 1
                changed = True
        if not changed:
            break
    return dist


def loss_of(model, X, y) -> float:
    with no_grad():
        return softmax_cross_entropy(model(Tensor(X)), y).item()


def analytic_grads(model, X, y):
    model.zero_grad()
    softmax_cross_entropy(model(Tensor(X)), y).backward()
    return [np.zeros_like(p.data) if p.grad is None else p.grad.copy() for p in model.parameters()]


def _patterns(model, X):
    with no_grad():
        return np.concatenate([(h.data > 0).ravel() for h in model.hidden_activations(Tensor(X))])


def finite_difference_grads(model, X, y, h=1e-3, skip_kinks=False):
    """Central differences of the loss; ``skip_kinks`` marks coordinates whose
    stencil changes a ReLU activation pattern with NaN."""
    out = []
    for p in model.parameters():
        num = np.zeros_like(p.data)
        for idx in np.ndindex(p.shape):
            old = p.data[idx]
            p.data[idx] = old + h
            lp = loss_of(model, X, y)
            pat_p = _patterns(model, X) if skip_kinks else None
            p.data[idx] = old - h
            lm = loss_of(model, X, y)
            pat_m = _patterns(model, X) if skip_kinks else None
            p.data[idx] = old
            num[idx] = (lp - lm) / (2 * h)
            if skip_kinks and not np.array_equal(pat_p, pat_m):
                num[idx] = np.nan
        out.append(num)
    return out


def max_relative_error(analytic, numeric) -> float:
    """max |a - n| / max(|a|, |n|) over entries, with 0/0 counted as 0; NaN entries skipped."""
    worst = 0.0
    for a, n in zip(analytic, numeric):
        ok = ~np.isnan(n)
        a, n = a[ok], n[ok]
        den = np.maximum(np.abs(a), np.abs(n))
        rel = np.divide(np.abs(a - n), den, out=np.zeros_like(den), where=den > 0)
        if rel.size:
            worst = max(worst, float(rel.max()))
    return worst


def layered(edges, nodes=()):
    return compute_layering(Dag(edges, nodes=nodes))


def random_model(rng):
    """FFN, DAN or cell network with random sizes, weights and pruned masks."""
    kind = rng.integers(3)
    seed = int(rng.integers(1000))
    if kind == 0:
        hidden = [int(h) for h in rng.integers(1, 6, rng.integers(0, 4))]
        m = MaskedDeepFFN(int(rng.integers(1, 6)), int(rng.integers(1, 4)), hidden,
                          activation=["relu", "tanh", "identity"][seed % 3], seed=seed)
    elif kind == 1:
        n = int(rng.integers(3, 25))
        lg = generate_random_layered_dag(n, int(rng.integers(2, min(n, 5) + 1)), 0.4, seed)
        m = build_dan(int(rng.integers(1, 5)), int(rng.integers(1, 4)), lg, seed=seed,
                      dtype=[np.float32, np.float64][seed % 2])
    else:
        lg = generate_random_layered_dag(int(rng.integers(2, 8)), 2, 0.5, seed)
        m = build_cell_dan(int(rng.integers(2, 5)), 2, channel_mix_constructor, lg, seed=seed)
    for p in m.parameters():
        p.data[...] = rng.normal(size=p.shape)
    recompute_mask(m, theta=float(rng.random()))
    return m


def assert_same_model(a, b):
    assert type(a) is type(b)
    pa, pb = a.named_parameters(), b.named_parameters()
    assert [n for n, _ in pa] == [n for n, _ in pb]
    for (_, p), (_, q) in zip(pa, pb):
        assert p.dtype == q.dtype and p.data.tobytes() == q.data.tobytes()
    for la, lb in zip(maskable_layers(a), maskable_layers(b)):
        assert la.mask.tobytes() == lb.mask.tobytes()
