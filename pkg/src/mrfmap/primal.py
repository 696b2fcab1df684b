"""Primal coordinate descent: ICM and block-ICM."""
from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from . import dp
from .consistency import round_dual
from .model import GraphicalModel, InvalidStructureError, PartialLabeling, check_labeling


def local_costs(model: GraphicalModel, y: np.ndarray, u: int) -> np.ndarray:
    """Cost of every label of ``u`` with all other nodes fixed to ``y``."""
    c = np.array(model.unary[u])
    for v, e in model.adjacency[u]:
        c += model.pairwise[e][:, y[v]] if u < v else model.pairwise[e][y[v], :]
    return c


def icm(model: GraphicalModel, y0=None, max_sweeps: int = 100) -> np.ndarray:
    """Iterated conditional modes.

    Nodes are visited in index order; a node moves only to a strictly
    better label, so the energy never increases.
    """
    y = round_dual(model.costs) if y0 is None else check_labeling(model, y0).copy()
    for _ in range(max_sweeps):
        changed = False
        for u in range(model.node_count):
            c = local_costs(model, y, u)
            s = int(np.argmin(c))
            if c[s] < c[y[u]]:
                y[u] = s
                changed = True
        if not changed:
            break
    return y


def conditional_costs(model: GraphicalModel, fixed: PartialLabeling):
    """Model over the free nodes with the fixed ones folded into unaries.

    Returns
    -------
    sub : GraphicalModel
        Model on the free nodes, renumbered in increasing original order.
    free : ndarray
        Original index of every node of ``sub``.
    constant : float
        Cost of the fixed nodes and of the edges among them.
    """
    fixed.validate(model)
    fx = fixed.as_dict()
    free = np.array([u for u in range(model.node_count) if u not in fx], dtype=np.int64)
    pos = {int(u): i for i, u in enumerate(free)}
    unary = [np.array(model.unary[u]) for u in free]
    constant = 0.0
    for u, s in fx.items():
        constant += float(model.unary[u][s])
    edges, mats = [], []
    for (u, v), th in zip(model.edges, model.pairwise):
        if u in fx and v in fx:
            constant += float(th[fx[u], fx[v]])
        elif u in fx:
            unary[pos[v]] += th[fx[u], :]
        elif v in fx:
            unary[pos[u]] += th[:, fx[v]]
        else:
            edges.append((pos[u], pos[v]))
            mats.append(th)
    sub = GraphicalModel([model.labels[u] for u in free], edges, unary, mats)
    return sub, free, constant


def grid_blocks(height: int, width: int) -> list:
    """Even columns, odd columns, even rows and odd rows of a row-major grid.

    With a single column (row) the odd-column (odd-row) block is the whole
    grid, which is then a path.
    """
    if height < 1 or width < 1:
        raise ValueError("grid dimensions must be positive")
    idx = np.arange(height * width).reshape(height, width)
    blocks = [idx[:, 0::2], idx[:, 1::2], idx[0::2, :], idx[1::2, :]]
    # a missing odd line would give an empty block; reuse the single line instead
    return [sorted((b if b.size else idx).ravel().tolist()) for b in blocks]


def block_icm(model: GraphicalModel, y0=None, schedule: Optional[Sequence] = None,
              max_rounds: int = 100) -> np.ndarray:
    """Block coordinate descent with exact tree solves per block.

    Every block must induce a forest. The block is replaced by the optimum
    of its conditional model only when that strictly lowers the energy.
    """
    y = round_dual(model.costs) if y0 is None else check_labeling(model, y0).copy()
    schedule = [list(range(model.node_count))] if schedule is None else schedule
    for _ in range(max_rounds):
        changed = False
        for block in schedule:
            block = set(int(u) for u in block)
            dom = tuple(u for u in range(model.node_count) if u not in block)
            sub, free, const = conditional_costs(
                model, PartialLabeling(dom, tuple(int(y[u]) for u in dom)))
            if not dp.is_forest(sub):
                raise InvalidStructureError(f"block {sorted(block)} induces a cycle")
            best, ys = dp.solve_tree(sub)
            cur = float(sum(sub.unary[i][y[u]] for i, u in enumerate(free)) +
                        sum(sub.pairwise[e][y[free[a]], y[free[b]]]
                            for e, (a, b) in enumerate(sub.edges)))
            if best < cur - 1e-12 * (1.0 + abs(cur)):
                y[free] = ys
                changed = True
        if not changed:
            break
    return y


def forest_blocks(model: GraphicalModel) -> list:
    """Cover the nodes with blocks that each induce a forest.

    Nodes are added greedily in index order to the first block where they
    close no cycle; a new block is opened when none fits.
    """
    blocks, roots = [], []
    for u in range(model.node_count):
        placed = False
        for b, parent in zip(blocks, roots):
            comps = {_find(parent, v) for v, _ in model.adjacency[u] if v in parent}
            touching = sum(1 for v, _ in model.adjacency[u] if v in parent)
            if len(comps) == touching:
                parent[u] = u
                for c in comps:
                    parent[c] = u
                b.append(u)
                placed = True
                break
        if not placed:
            blocks.append([u])
            roots.append({u: u})
    return blocks


def _find(parent, a):
    while parent[a] != a:
        parent[a] = parent[parent[a]]
        a = parent[a]
    return a
