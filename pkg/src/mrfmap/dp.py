"""Exact MAP inference on chains and forests by dynamic programming."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .model import GraphicalModel, InvalidStructureError


@dataclass
class ChainMessages:
    """Forward/backward messages and back pointers along a chain order.

    ``forward[i]`` and ``backward[i]`` belong to ``order[i]``. ``pointers[i][t]``
    is the best label of ``order[i-1]`` given ``order[i]`` takes ``t``.
    """

    order: list
    forward: list
    backward: list
    pointers: list


@dataclass
class MinMarginals:
    """Node min-marginals ``node[u][s]`` and edge min-marginals ``edge[e][s, t]``."""

    node: list
    edge: list


def _check_chain(model: GraphicalModel, order) -> list:
    order = [int(u) for u in order]
    n = model.node_count
    if sorted(order) != list(range(n)):
        raise InvalidStructureError("order must be a permutation of all nodes")
    if model.edge_count != max(n - 1, 0):
        raise InvalidStructureError("a chain over n nodes has exactly n - 1 edges")
    for a, b in zip(order, order[1:]):
        if (min(a, b), max(a, b)) not in model.edge_index:
            raise InvalidStructureError(f"nodes {a} and {b} are consecutive but not adjacent")
    return order


def chain_order(model: GraphicalModel) -> list:
    """Node sequence of a chain model starting from its lowest-index end."""
    n = model.node_count
    if n == 1:
        return [0]
    deg = [len(a) for a in model.adjacency]
    ends = [u for u in range(n) if deg[u] == 1]
    if not ends or model.edge_count != n - 1 or max(deg) > 2:
        raise InvalidStructureError("model is not a chain")
    order, prev, cur = [ends[0]], -1, ends[0]
    while len(order) < n:
        nxt = [v for v, _ in model.adjacency[cur] if v != prev]
        if not nxt:
            raise InvalidStructureError("model is not connected")
        prev, cur = cur, nxt[0]
        order.append(cur)
    return order


def forward_messages(model: GraphicalModel, order):
    """Forward recursion; returns ``(F, pointers)``."""
    F = [np.zeros(model.labels[order[0]])]
    ptr = [np.zeros(model.labels[order[0]], dtype=np.int64)]
    for a, b in zip(order, order[1:]):
        tab = (F[-1] + model.unary[a])[:, None] + model.pair(a, b)
        k = np.argmin(tab, axis=0)
        ptr.append(k)
        F.append(tab[k, np.arange(tab.shape[1])])
    return F, ptr


def backward_messages(model: GraphicalModel, order):
    B = [np.zeros(model.labels[order[-1]])]
    for a, b in zip(order[::-1][1:], order[::-1]):
        tab = model.pair(a, b) + (B[-1] + model.unary[b])[None, :]
        B.append(tab.min(axis=1))
    return B[::-1]


def solve_chain(model: GraphicalModel, order: Optional[Sequence[int]] = None):
    """Exact minimum of a chain model.

    Parameters
    ----------
    model : GraphicalModel
        Must be a simple path.
    order : sequence of int, optional
        Node sequence along the path. Found automatically if omitted.

    Returns
    -------
    energy : float
    labeling : ndarray
    messages : ChainMessages
    """
    order = _check_chain(model, chain_order(model) if order is None else order)
    F, ptr = forward_messages(model, order)
    last = order[-1]
    tot = F[-1] + model.unary[last]
    y = np.zeros(model.node_count, dtype=np.int64)
    y[last] = int(np.argmin(tot))
    for i in range(len(order) - 1, 0, -1):
        y[order[i - 1]] = ptr[i][y[order[i]]]
    B = backward_messages(model, order)
    return float(tot[y[last]]), y, ChainMessages(order, F, B, ptr)


def reconstruct_chain(model: GraphicalModel, order, F, y_last: Optional[int] = None) -> np.ndarray:
    """Labeling from forward messages alone, without back pointers.

    Each node takes the argmin of ``F_i(t) + theta_i(t) + theta_{i,i+1}(t, y_{i+1})``.
    """
    y = np.zeros(model.node_count, dtype=np.int64)
    last = order[-1]
    y[last] = int(np.argmin(F[-1] + model.unary[last])) if y_last is None else y_last
    for i in range(len(order) - 2, -1, -1):
        a, b = order[i], order[i + 1]
        y[a] = int(np.argmin(F[i] + model.unary[a] + model.pair(a, b)[:, y[b]]))
    return y


def min_marginals_chain(model: GraphicalModel, order: Optional[Sequence[int]] = None) -> MinMarginals:
    """Node and edge min-marginals of a chain by forward-backward recursion."""
    order = _check_chain(model, chain_order(model) if order is None else order)
    F, _ = forward_messages(model, order)
    B = backward_messages(model, order)
    node = [None] * model.node_count
    for i, u in enumerate(order):
        node[u] = F[i] + B[i] + model.unary[u]
    edge = [None] * model.edge_count
    for i in range(len(order) - 1):
        a, b = order[i], order[i + 1]
        mat = ((F[i] + model.unary[a])[:, None] + (B[i + 1] + model.unary[b])[None, :]
               + model.pair(a, b))
        e = model.edge_index[(min(a, b), max(a, b))]
        edge[e] = mat if a < b else mat.T
    return MinMarginals(node, edge)


def _components(model: GraphicalModel):
    seen = np.zeros(model.node_count, dtype=bool)
    comps = []
    for r in range(model.node_count):
        if seen[r]:
            continue
        seen[r] = True
        comp, q = [r], deque([r])
        while q:
            u = q.popleft()
            for v, _ in model.adjacency[u]:
                if not seen[v]:
                    seen[v] = True
                    comp.append(v)
                    q.append(v)
        comps.append(comp)
    return comps


def _bfs_tree(model: GraphicalModel, root: int):
    """BFS order and parent array of the component of ``root``; errors on cycles."""
    parent = {root: -1}
    order, q = [root], deque([root])
    while q:
        u = q.popleft()
        for v, _ in model.adjacency[u]:
            if v == parent[u]:
                continue
            if v in parent:
                raise InvalidStructureError("graph contains a cycle")
            parent[v] = u
            order.append(v)
            q.append(v)
    return order, parent


def is_forest(model: GraphicalModel) -> bool:
    return model.edge_count == model.node_count - len(_components(model))


def solve_tree(model: GraphicalModel, root: Optional[Sequence[int]] = None):
    """Exact minimum of a forest model by leaf elimination.

    Parameters
    ----------
    root : sequence of int, optional
        One root per connected component. By default the lowest-index node
        of every component is its root, so elimination starts at the leaves
        farthest from it.

    Returns
    -------
    energy : float
    labeling : ndarray
    """
    if not is_forest(model):
        raise InvalidStructureError("graph contains a cycle")
    comps = _components(model)
    roots = [min(c) for c in comps] if root is None else list(root)
    if len(roots) != len(comps):
        raise InvalidStructureError("one root per connected component is required")
    y = np.zeros(model.node_count, dtype=np.int64)
    total = 0.0
    for r in roots:
        order, parent = _bfs_tree(model, r)
        F = {u: np.array(model.unary[u]) for u in order}
        ptr = {}
        for v in reversed(order[1:]):
            p = parent[v]
            tab = model.pair(p, v) + F[v][None, :]
            k = np.argmin(tab, axis=1)
            ptr[v] = k
            F[p] = F[p] + tab[np.arange(tab.shape[0]), k]
        y[r] = int(np.argmin(F[r]))
        total += float(F[r][y[r]])
        for v in order[1:]:
            y[v] = ptr[v][y[parent[v]]]
    return total, y


def min_marginals_tree(model: GraphicalModel) -> MinMarginals:
    """Node and edge min-marginals of a forest by two-pass message passing.

    For a forest with several components every min-marginal also includes
    the optimal energy of the other components.
    """
    if not is_forest(model):
        raise InvalidStructureError("graph contains a cycle")
    node = [None] * model.node_count
    edge = [None] * model.edge_count
    comp_opt = []
    comp_nodes = []
    for comp in _components(model):
        r = min(comp)
        order, parent = _bfs_tree(model, r)
        up = {}
        acc = {u: np.array(model.unary[u]) for u in order}
        for v in reversed(order[1:]):
            p = parent[v]
            up[v] = (model.pair(p, v) + acc[v][None, :]).min(axis=1)
            acc[p] = acc[p] + up[v]
        down = {r: np.zeros(model.labels[r])}
        for v in order[1:]:
            p = parent[v]
            pre = acc[p] + down[p] - up[v]
            down[v] = (model.pair(p, v) + pre[:, None]).min(axis=0)
        for u in order:
            node[u] = acc[u] + down[u]
        for v in order[1:]:
            p = parent[v]
            mat = (acc[p] + down[p] - up[v])[:, None] + model.pair(p, v) + acc[v][None, :]
            e = model.edge_index[(min(p, v), max(p, v))]
            edge[e] = mat if p < v else mat.T
        comp_opt.append(float(node[r].min()))
        comp_nodes.append(order)
    total = sum(comp_opt)
    for c, order in enumerate(comp_nodes):
        rest = total - comp_opt[c]
        if rest != 0.0:
            for u in order:
                node[u] = node[u] + rest
            for u in order:
                for v, e in model.adjacency[u]:
                    if u < v:
                        edge[e] = edge[e] + rest
    return MinMarginals(node, edge)
