import numpy as np
import pytest
from hypothesis import strategies as st

from mrfmap.model import GraphicalModel


def random_edges(rng, n, p=0.5):
    return [(u, v) for u in range(n) for v in range(u + 1, n) if rng.random() < p]


def random_tree_edges(rng, n):
    return [(int(rng.integers(i)), i) for i in range(1, n)]


def random_model(rng, n, L, edges, integer=True, lo=-4, hi=5):
    Ls = [L] * n if np.isscalar(L) else list(L)

    def draw(shape):
        if integer:
            return rng.integers(lo, hi, shape).astype(float)
        return rng.uniform(lo, hi, shape)
    un = [draw(Ls[u]) for u in range(n)]
    mats = [draw((Ls[u], Ls[v])) for u, v in edges]
    return GraphicalModel(Ls, edges, un, mats)


def random_chain(rng, n, L):
    return random_model(rng, n, L, [(i, i + 1) for i in range(n - 1)])


def random_submodular_binary(rng, n, p=0.5, integer=True):
    edges = random_edges(rng, n, p)
    mats = []
    for _ in edges:
        a, d = rng.integers(-3, 4, 2).astype(float)
        slack = float(rng.integers(0, 5)) if integer else rng.uniform(0, 4)
        b = float(rng.integers(-3, 4)) if integer else rng.uniform(-3, 3)
        c = a + d - b + slack
        mats.append(np.array([[a, b], [c, d]]))
    un = [rng.integers(-4, 5, 2).astype(float) for _ in range(n)]
    return GraphicalModel([2] * n, edges, un, mats)


def random_submodular_multilabel(rng, n, L, p=0.5):
    """Pairwise costs w|s - t| plus separable terms: all submodular."""
    edges = random_edges(rng, n, p)
    s = np.arange(L)
    mats = []
    for _ in edges:
        w = float(rng.integers(0, 4))
        mats.append(w * np.abs(s[:, None] - s[None, :]) + rng.integers(0, 3, L)[:, None]
                    + rng.integers(0, 3, L)[None, :])
    un = [rng.integers(-4, 5, L).astype(float) for _ in range(n)]
    return GraphicalModel([L] * n, edges, un, mats)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@st.composite
def small_models(draw, max_nodes=5, max_labels=3, tree=False, chain=False):
    n = draw(st.integers(1, max_nodes))
    Ls = draw(st.lists(st.integers(1, max_labels), min_size=n, max_size=n))
    if chain:
        edges = [(i, i + 1) for i in range(n - 1)]
    elif tree:
        edges = [(draw(st.integers(0, i - 1)), i) for i in range(1, n)]
    else:
        pairs = [(u, v) for u in range(n) for v in range(u + 1, n)]
        edges = [p for p in pairs if draw(st.booleans())]
    cost = st.integers(-5, 5).map(float)
    un = [np.array(draw(st.lists(cost, min_size=L, max_size=L))) for L in Ls]
    mats = [np.array(draw(st.lists(cost, min_size=Ls[u] * Ls[v], max_size=Ls[u] * Ls[v])))
            .reshape(Ls[u], Ls[v]) for u, v in edges]
    return GraphicalModel(Ls, edges, un, mats)


def chain_message_phi(model, dec):
    """Reparametrization whose costs correspond to a chain decomposition.

    Built from the exact forward/backward messages of every chain slave, so
    that SRMP started here and averaging started from ``dec`` run in step.
    """
    from mrfmap import dp
    from mrfmap.model import Reparametrization
    phi = Reparametrization(model)
    for t, sl in enumerate(dec.slaves):
        if not sl.edges:
            continue
        sm = dec.slave_model(t)
        order = list(range(len(sl.nodes)))
        F, _ = dp.forward_messages(sm, order)
        B = dp.backward_messages(sm, order)
        for i in range(len(order) - 1):
            a, b = sl.nodes[i], sl.nodes[i + 1]
            phi.phi(a, b)[:] = F[i] + sm.unary[i]
            phi.phi(b, a)[:] = sm.unary[i + 1] + B[i + 1]
    return phi


def connected_model(rng, n, L, extra=0.3, integer=True):
    edges = set(random_tree_edges(rng, n))
    edges |= {(u, v) for u in range(n) for v in range(u + 1, n) if rng.random() < extra}
    return random_model(rng, n, L, sorted(edges), integer=integer)
