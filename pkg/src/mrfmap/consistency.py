"""Lagrange dual, arc consistency and rounding rules."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .model import CostVector, GraphicalModel, RelaxedLabeling, Reparametrization, reparametrize


@dataclass
class IndicatorField:
    """Boolean vector with the node/edge layout of a model."""

    node: list
    edge: list
    edges: tuple

    def copy(self) -> "IndicatorField":
        return IndicatorField([a.copy() for a in self.node], [a.copy() for a in self.edge],
                              self.edges)

    def is_zero(self) -> bool:
        return not any(a.any() for a in self.node + self.edge)

    def all_factors_nonempty(self) -> bool:
        return all(a.any() for a in self.node + self.edge)

    def __le__(self, other: "IndicatorField") -> bool:
        return all(not (a & ~b).any() for a, b in zip(self.node + self.edge,
                                                      other.node + other.edge))

    def __or__(self, other: "IndicatorField") -> "IndicatorField":
        return IndicatorField([a | b for a, b in zip(self.node, other.node)],
                              [a | b for a, b in zip(self.edge, other.edge)], self.edges)

    def __eq__(self, other) -> bool:
        if not isinstance(other, IndicatorField):
            return NotImplemented
        return all(np.array_equal(a, b) for a, b in zip(self.node + self.edge,
                                                        other.node + other.edge))


@dataclass
class AgreementReport:
    """Outcome of :func:`epsilon_agreement`.

    ``status`` is ``"strict"`` when the closure of the locally minimal
    entries selects exactly one label per node and one pair per edge,
    ``"agree"`` when it is non-empty in every factor and ``"none"`` otherwise.
    """

    status: str
    epsilon: float
    closure: IndicatorField


def _adjacency(n, edges):
    adj = [[] for _ in range(n)]
    for e, (u, v) in enumerate(edges):
        adj[u].append((e, 0))
        adj[v].append((e, 1))
    return adj


def dual_value_costs(costs: CostVector) -> float:
    """Sum over all factors of the minimal cost."""
    return float(sum(a.min() for a in costs.unary) + sum(a.min() for a in costs.pairwise))


def dual_value(model: GraphicalModel, phi: Optional[Reparametrization] = None) -> float:
    """Lagrange dual ``D(phi)``, a lower bound on every labeling's energy."""
    if phi is None:
        return dual_value_costs(model.costs)
    return dual_value_costs(reparametrize(model, phi))


def _default_eps(a):
    return 1e-9 * (1.0 + abs(float(a.min())))


def mi(costs: CostVector, eps: Optional[float] = None) -> IndicatorField:
    """Indicator of entries within ``eps`` of their factor minimum.

    With ``eps=None`` each factor uses ``1e-9 * (1 + |min|)``.
    """
    def one(a):
        e = _default_eps(a) if eps is None else eps
        return a <= a.min() + e
    return IndicatorField([one(a) for a in costs.unary], [one(a) for a in costs.pairwise],
                          costs.edges)


def nz(mu: RelaxedLabeling, edges: tuple = None) -> IndicatorField:
    """Indicator of the non-zero coordinates of ``mu``."""
    return IndicatorField([np.asarray(a) != 0 for a in mu.node_part],
                          [np.asarray(a) != 0 for a in mu.edge_part], edges)


def closure(xi: IndicatorField) -> IndicatorField:
    """Largest arc-consistent field below ``xi`` (relaxation labeling).

    Sweeps nodes then edges in index order until a full pass changes nothing.
    """
    out = xi.copy()
    adj = _adjacency(len(out.node), out.edges)
    changed = True
    while changed:
        changed = False
        for u, nb in enumerate(adj):
            cur = out.node[u]
            new = cur.copy()
            for e, side in nb:
                new &= out.edge[e].any(axis=1 - side)
            if not np.array_equal(new, cur):
                out.node[u] = new
                changed = True
        for e, (u, v) in enumerate(out.edges):
            cur = out.edge[e]
            new = cur & out.node[u][:, None] & out.node[v][None, :]
            if not np.array_equal(new, cur):
                out.edge[e] = new
                changed = True
    return out


def is_arc_consistent(xi: IndicatorField) -> bool:
    for e, (u, v) in enumerate(xi.edges):
        m = xi.edge[e]
        if (m & ~(xi.node[u][:, None] & xi.node[v][None, :])).any():
            return False
        if (xi.node[u] & ~m.any(axis=1)).any() or (xi.node[v] & ~m.any(axis=0)).any():
            return False
    return True


def is_strictly_arc_consistent(xi: IndicatorField) -> bool:
    if not all(a.sum() == 1 for a in xi.node + xi.edge):
        return False
    return is_arc_consistent(xi)


def minmax_relaxation(costs: CostVector) -> CostVector:
    """Min/max variant of relaxation labeling run to its fixed point.

    Each factor is first shifted so that its minimum is zero.
    """
    node = [a - a.min() for a in costs.unary]
    edge = [a - a.min() for a in costs.pairwise]
    adj = _adjacency(len(node), costs.edges)
    changed = True
    while changed:
        changed = False
        for u, nb in enumerate(adj):
            new = node[u]
            for e, side in nb:
                new = np.maximum(new, edge[e].min(axis=1 - side))
            if not np.array_equal(new, node[u]):
                node[u] = new
                changed = True
        for e, (u, v) in enumerate(costs.edges):
            new = np.maximum(edge[e], np.maximum(node[u][:, None], node[v][None, :]))
            if not np.array_equal(new, edge[e]):
                edge[e] = new
                changed = True
    return CostVector(tuple(node), tuple(edge), costs.edges)


def _component_ids(n, edges):
    comp = list(range(n))

    def find(a):
        while comp[a] != a:
            comp[a] = comp[comp[a]]
            a = comp[a]
        return a
    for u, v in edges:
        ru, rv = find(u), find(v)
        if ru != rv:
            comp[max(ru, rv)] = min(ru, rv)
    return [find(u) for u in range(n)]


def epsilon_level(fix: CostVector) -> float:
    """Largest, over connected components, of the minimal coordinate of ``fix``."""
    comp = _component_ids(len(fix.unary), fix.edges)
    level = {}
    for u, a in enumerate(fix.unary):
        level[comp[u]] = min(level.get(comp[u], np.inf), float(a.min()))
    for (u, _), a in zip(fix.edges, fix.pairwise):
        level[comp[u]] = min(level[comp[u]], float(a.min()))
    return max(level.values()) if level else 0.0


def epsilon_agreement(costs: CostVector) -> AgreementReport:
    """Smallest slack for which the relaxed locally-optimal sets agree.

    ``epsilon`` is the smallest ``t >= 0`` such that the closure of
    ``mi(costs, t)`` is non-empty in every factor. It is read off the
    fixed point of :func:`minmax_relaxation` as the largest, over connected
    components, of the minimal coordinate in that component.
    """
    eps = epsilon_level(minmax_relaxation(costs))
    cl = closure(mi(costs))
    if is_strictly_arc_consistent(cl):
        status = "strict"
    elif cl.all_factors_nonempty():
        status = "agree"
    else:
        status = "none"
    return AgreementReport(status, float(eps), cl)


def round_primal(mu: RelaxedLabeling) -> np.ndarray:
    """Per node, the label of largest relaxed weight (lowest index on ties)."""
    return np.array([int(np.argmax(a)) for a in mu.node_part], dtype=np.int64)


def round_dual(costs: CostVector) -> np.ndarray:
    """Per node, the label of smallest cost (lowest index on ties)."""
    return np.array([int(np.argmin(a)) for a in costs.unary], dtype=np.int64)


def extract_tree_labeling(xi: IndicatorField) -> Optional[np.ndarray]:
    """Labeling selected from an arc-consistent field on a forest.

    Grows a labeled set from the lowest-index node of every component,
    each time picking the lowest supported label. Returns ``None`` if
    some node has no label left.
    """
    n = len(xi.node)
    adj = _adjacency(n, xi.edges)
    y = np.full(n, -1, dtype=np.int64)
    for r in range(n):
        if y[r] >= 0:
            continue
        if not xi.node[r].any():
            return None
        y[r] = int(np.argmax(xi.node[r]))
        q = deque([r])
        while q:
            u = q.popleft()
            for e, side in adj[u]:
                a, b = xi.edges[e]
                v = b if side == 0 else a
                if y[v] >= 0:
                    continue
                row = xi.edge[e][y[u], :] if side == 0 else xi.edge[e][:, y[u]]
                if not row.any():
                    return None
                y[v] = int(np.argmax(row))
                q.append(v)
    return y
