"""Deterministic instance generators and the small named models.

Random kinds draw from :class:`SplitMix64`, a 64-bit generator whose
outputs are identical on every platform::

    state += 0x9E3779B97F4A7C15
    z = state
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB
    return z ^ (z >> 31)

(all arithmetic modulo 2**64). A uniform double in [0, 1) is the top 53
bits of the output times 2**-53.
"""
from __future__ import annotations

from typing import Iterable, Optional

import numpy as np

from ..model import BIG, GraphicalModel, InvalidModelError

_MASK = (1 << 64) - 1


class SplitMix64:
    """64-bit splitmix generator."""

    def __init__(self, seed: int = 0):
        self.state = int(seed) & _MASK

    def next(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & _MASK
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
        return z ^ (z >> 31)

    def uniform(self, lo: float = 0.0, hi: float = 1.0) -> float:
        return lo + (hi - lo) * ((self.next() >> 11) * 2.0 ** -53)

    def uniforms(self, shape, lo: float = 0.0, hi: float = 1.0) -> np.ndarray:
        n = int(np.prod(shape))
        return np.array([self.uniform(lo, hi) for _ in range(n)]).reshape(shape)

    def integer(self, n: int) -> int:
        """Uniform integer in ``[0, n)``."""
        return int(self.uniform() * n)


def grid_edges(height: int, width: int) -> list:
    """Horizontal then vertical 4-neighbor edges of a row-major grid."""
    idx = np.arange(height * width).reshape(height, width)
    hor = [(int(a), int(b)) for a, b in zip(idx[:, :-1].ravel(), idx[:, 1:].ravel())]
    ver = [(int(a), int(b)) for a, b in zip(idx[:-1, :].ravel(), idx[1:, :].ravel())]
    return hor + ver


def potts(L: int, lam: float = 1.0) -> np.ndarray:
    return lam * (1.0 - np.eye(L))


def _random_model(rng, n, L, edges, pair):
    unary = [rng.uniforms(L) for _ in range(n)]
    return GraphicalModel([L] * n, edges, unary, [pair() for _ in edges])


def grid_potts(height=3, width=3, labels=3, seed=0, lam_lo=0.1, lam_hi=1.0):
    """Grid with uniform unaries and Potts edges of random positive strength."""
    rng = SplitMix64(seed)
    return _random_model(rng, height * width, labels, grid_edges(height, width),
                         lambda: potts(labels, rng.uniform(lam_lo, lam_hi)))


def grid_random(height=3, width=3, labels=3, seed=0):
    rng = SplitMix64(seed)
    return _random_model(rng, height * width, labels, grid_edges(height, width),
                         lambda: rng.uniforms((labels, labels)))


def chain_random(n=5, labels=3, seed=0):
    rng = SplitMix64(seed)
    return _random_model(rng, n, labels, [(i, i + 1) for i in range(n - 1)],
                         lambda: rng.uniforms((labels, labels)))


def tree_random(n=6, labels=3, seed=0):
    """Random recursive tree: node ``i`` hangs below a uniform earlier node."""
    rng = SplitMix64(seed)
    edges = [(rng.integer(i), i) for i in range(1, n)]
    return _random_model(rng, n, labels, edges, lambda: rng.uniforms((labels, labels)))


def hamiltonian(vertices: int, graph_edges: Iterable, directed: bool = False) -> GraphicalModel:
    """Model whose optimum is 0 iff the graph has a Hamiltonian cycle.

    Node ``i`` is the i-th position of the tour and its label is the graph
    vertex visited there. Consecutive positions (cyclically) pay 1 for a
    pair that is not an arc; every other pair of positions pays 1 for
    visiting the same vertex twice.
    """
    n = int(vertices)
    if n < 3:
        raise InvalidModelError("hamiltonian needs at least three vertices")
    adj = np.zeros((n, n), dtype=bool)
    for a, b in graph_edges:
        adj[a, b] = True
        if not directed:
            adj[b, a] = True
    step = (~adj).astype(np.float64)
    same = np.eye(n)
    edges, mats = [], []
    for u in range(n):
        for v in range(u + 1, n):
            edges.append((u, v))
            if v == u + 1:
                mats.append(step)
            elif u == 0 and v == n - 1:
                mats.append(step.T.copy())
            else:
                mats.append(same)
    return GraphicalModel([n] * n, edges, [np.zeros(n)] * n, mats)


def frustrated_triangle(alpha: float = 1.0) -> GraphicalModel:
    """Frustrated binary triangle with zero unaries."""
    agree = np.array([[0.0, alpha], [alpha, 0.0]])
    differ = np.array([[alpha, 0.0], [0.0, alpha]])
    return GraphicalModel([2, 2, 2], [(0, 1), (0, 2), (1, 2)], [np.zeros(2)] * 3,
                          [agree, agree, differ])


def triangle_third_label(alpha: float = 1.0, beta: float = 0.25) -> GraphicalModel:
    """The triangle above with a third label at the last node."""
    a13 = np.array([[0.0, alpha, alpha], [alpha, 0.0, beta]])
    a23 = np.array([[alpha, 0.0, alpha], [0.0, alpha, beta]])
    a12 = np.array([[0.0, alpha], [alpha, 0.0]])
    return GraphicalModel([2, 2, 3], [(0, 1), (0, 2), (1, 2)],
                          [np.zeros(2), np.zeros(2), np.zeros(3)], [a12, a13, a23])


def icm_trap() -> GraphicalModel:
    """Two binary nodes where ICM gets stuck at (1, 1)."""
    return GraphicalModel([2, 2], [(0, 1)], [np.zeros(2)] * 2,
                          [np.array([[0.0, 2.0], [2.0, 1.0]])])


def constant_chain(n: int = 5, high: float = 100.0, heavy_edge: int = 0) -> GraphicalModel:
    """Binary chain with ``n`` edges allowing only the two constant labelings.

    Label 0 pays -1 on every edge, label 1 pays -n on ``heavy_edge`` and 0
    elsewhere; mixed pairs cost ``high``, a finite stand-in for infinity.
    """
    mats = []
    for e in range(n):
        low = -float(n) if e == heavy_edge else 0.0
        mats.append(np.array([[-1.0, high], [high, low]]))
    return GraphicalModel([2] * (n + 1), [(i, i + 1) for i in range(n)],
                          [np.zeros(2)] * (n + 1), mats)


def swap_trap(K: float = 100.0) -> GraphicalModel:
    """Three-label chain where alpha-beta-swap stalls at energy K."""
    un = [np.array([0.0, K, 2.0]), np.array([K, 0.0, 2.0]), np.array([K, K, 0.0])]
    d = np.array([[0.0, K / 2, K], [K / 2, 0.0, K / 2], [K, K / 2, 0.0]])
    return GraphicalModel([3] * 3, [(0, 1), (1, 2)], un, [d, d])


def finitize(model: GraphicalModel, high: Optional[float] = None) -> GraphicalModel:
    """Replace every BIG entry by a finite cost above any finite energy."""
    fin = [a[np.abs(a) < BIG] for a in model.unary + model.pairwise]
    span = sum(float(np.abs(a).max()) for a in fin if a.size)
    high = 1.0 + 2.0 * span if high is None else float(high)
    fix = lambda a: np.where(a >= BIG, high, np.where(a <= -BIG, -high, a))  # noqa: E731
    return GraphicalModel(model.labels, model.edges, [fix(a) for a in model.unary],
                          [fix(a) for a in model.pairwise])


KINDS = {
    "grid-potts": grid_potts,
    "grid-random": grid_random,
    "chain-random": chain_random,
    "tree-random": tree_random,
    "hamiltonian": hamiltonian,
    "triangle": frustrated_triangle,
    "triangle-3": triangle_third_label,
    "icm-trap": icm_trap,
    "constant-chain": constant_chain,
    "swap-trap": swap_trap,
}


def generate(kind: str, seed: int = 0, **params) -> GraphicalModel:
    """Build an instance of ``kind``; random kinds take ``seed``."""
    if kind not in KINDS:
        raise InvalidModelError(f"unknown generator kind {kind!r}")
    fn = KINDS[kind]
    if kind in ("grid-potts", "grid-random", "chain-random", "tree-random"):
        params["seed"] = seed
    try:
        return fn(**params)
    except TypeError as exc:
        raise InvalidModelError(f"bad parameters for {kind}: {exc}") from None
