"""Roof duality on binary models by a doubled min-cut, and fusion moves."""
from __future__ import annotations

import itertools
from functools import lru_cache
from typing import NamedTuple

import numpy as np

from ..model import GraphicalModel, InvalidModelError, RelaxedLabeling, check_labeling
from .maxflow import SINK, SOURCE, STGraph, max_flow


class QpboResult(NamedTuple):
    """Half-integral relaxed labeling, its integral nodes and the bound."""

    mu: RelaxedLabeling
    persistent: np.ndarray
    lower_bound: float
    labeling: np.ndarray


@lru_cache(maxsize=None)
def _completions(a: float, b: float):
    """Half-integral 2x2 tables with row sums (1-a, a) and column sums (1-b, b)."""
    out = []
    for t in itertools.product((0.0, 0.5, 1.0), repeat=4):
        m = np.array(t).reshape(2, 2)
        if (m.sum(1) == (1 - a, a)).all() and (m.sum(0) == (1 - b, b)).all():
            out.append(m)
    return tuple(out)


def _normal_form(th):
    """Split a 2x2 factor into ``const, p x_u, q x_v`` and non-negative pair terms.

    Returns ``(const, p, q, b1, c1, k)`` meaning
    ``const + p x_u + q x_v + b1 ~x_u x_v + c1 x_u ~x_v + k x_u x_v``.
    """
    a, b, c, d = th[0, 0], th[0, 1], th[1, 0], th[1, 1]
    if a + d <= b + c:
        q = min(max(0.0, d - c), b - a)
        p = d - a - q
        return a, p, q, b - a - q, c - d + q, 0.0
    return a, c - a, b - a, 0.0, 0.0, a + d - b - c


def qpbo(model: GraphicalModel) -> QpboResult:
    """Half-integral optimum of the local relaxation of a binary model.

    The nodes ``0..n-1`` of the doubled graph carry ``y`` and ``n..2n-1``
    carry ``z``, the intended complement of ``y``. A node whose two copies
    disagree is integral and persistent; one whose copies agree gets ½.

    Returns
    -------
    QpboResult
        ``labeling`` rounds ½ to 0 and is only a convenience.
    """
    if (model.labels != 2).any():
        raise InvalidModelError("qpbo needs two labels per node")
    n = model.node_count
    g = STGraph(2 * n)
    lin = [np.array(c, dtype=np.float64) for c in model.unary]
    const = 0.0
    pairs = []
    for (u, v), th in zip(model.edges, model.pairwise):
        a, p, q, b1, c1, k = _normal_form(th)
        const += a
        lin[u][1] += p
        lin[v][1] += q
        pairs.append((u, v, b1, c1, k))
    for u, c in enumerate(lin):
        m = float(c.min())
        const += m
        c1, c0 = c[1] - m, c[0] - m
        g.add_arc(SOURCE, u, 0.5 * c1)
        g.add_arc(n + u, SINK, 0.5 * c1)
        g.add_arc(u, SINK, 0.5 * c0)
        g.add_arc(SOURCE, n + u, 0.5 * c0)
    for u, v, b1, c1, k in pairs:
        g.add_arc(u, v, 0.5 * b1)
        g.add_arc(n + v, n + u, 0.5 * b1)
        g.add_arc(v, u, 0.5 * c1)
        g.add_arc(n + u, n + v, 0.5 * c1)
        g.add_arc(n + v, u, 0.5 * k)
        g.add_arc(n + u, v, 0.5 * k)
    res = max_flow(g, source_side="maximal")
    y, z = res.side[:n], res.side[n:]
    x = np.where(y != z, y.astype(np.float64), 0.5)
    node = tuple(np.array([1.0 - xi, xi]) for xi in x)
    edge = []
    for (u, v), th in zip(model.edges, model.pairwise):
        best = None
        for m in _completions(float(x[u]), float(x[v])):
            val = float((m * th).sum())
            if best is None or val < best[0]:
                best = (val, m)
        edge.append(best[1].copy())
    persistent = np.flatnonzero(y != z)
    lab = np.where(x == 1.0, 1, 0).astype(np.int64)
    return QpboResult(RelaxedLabeling(node, tuple(edge)), persistent,
                      float(res.flow + const), lab)


def restrict(model: GraphicalModel, current, proposal) -> GraphicalModel:
    """Binary model choosing per node between ``current`` (0) and ``proposal`` (1)."""
    y0 = check_labeling(model, current)
    y1 = check_labeling(model, proposal)
    un = [np.array([c[y0[u]], c[y1[u]]]) for u, c in enumerate(model.unary)]
    mats = [th[np.ix_([y0[u], y1[u]], [y0[v], y1[v]])]
            for (u, v), th in zip(model.edges, model.pairwise)]
    return GraphicalModel([2] * model.node_count, model.edges, un, mats)


def fusion_move(model: GraphicalModel, current, proposal) -> np.ndarray:
    """Take the proposal label wherever roof duality fixes the node to it.

    The result never has higher energy than ``current``.
    """
    y0 = check_labeling(model, current)
    y1 = check_labeling(model, proposal)
    if model.node_count == 0 or (y0 == y1).all():
        return y0.copy()
    r = qpbo(restrict(model, y0, y1))
    take = np.array([m[1] == 1.0 for m in r.mu.node_part], dtype=bool)
    return np.where(take, y1, y0)
