"""Lagrange decomposition into tree slaves.

A decomposition stores slave costs directly; every update keeps their sum
equal to the master costs, so the Lagrange multipliers never appear.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence

import numpy as np

from . import dp
from .consistency import round_dual
from .dual_ascent import SolverTrace, dual
from .model import (BIG, CostVector, GraphicalModel, InvalidStructureError, Reparametrization,
                    energy, reparametrize)


class InvalidWeightsError(ValueError):
    pass


@dataclass(frozen=True)
class Slave:
    """Tree subgraph of the master: sorted node list and master edge indices."""

    nodes: tuple
    edges: tuple


@dataclass
class Decomposition:
    """Tree slaves with costs that sum to the master costs.

    ``unary[t][i]`` is the cost of slave ``t`` at its ``i``-th node and
    ``pairwise[t][j]`` the matrix of its ``j``-th edge, oriented as in the
    master.
    """

    model: GraphicalModel
    slaves: list
    unary: list
    pairwise: list
    node_members: list = field(default_factory=list)
    edge_members: list = field(default_factory=list)

    def __post_init__(self):
        if not self.node_members:
            self.node_members = [[] for _ in range(self.model.node_count)]
            self.edge_members = [[] for _ in range(self.model.edge_count)]
            for t, sl in enumerate(self.slaves):
                for i, u in enumerate(sl.nodes):
                    self.node_members[u].append((t, i))
                for j, e in enumerate(sl.edges):
                    self.edge_members[e].append((t, j))

    def copy(self) -> "Decomposition":
        return Decomposition(self.model, self.slaves,
                             [[a.copy() for a in us] for us in self.unary],
                             [[a.copy() for a in ps] for ps in self.pairwise],
                             self.node_members, self.edge_members)

    def slave_model(self, t: int, unary=None) -> GraphicalModel:
        sl = self.slaves[t]
        pos = {u: i for i, u in enumerate(sl.nodes)}
        edges = [(pos[self.model.edges[e][0]], pos[self.model.edges[e][1]]) for e in sl.edges]
        return GraphicalModel([self.model.labels[u] for u in sl.nodes], edges,
                              self.unary[t] if unary is None else unary, self.pairwise[t])

    def feasibility_gap(self) -> float:
        """Largest deviation of the summed slave costs from the master costs."""
        gap = 0.0
        for u, mem in enumerate(self.node_members):
            s = sum(self.unary[t][i] for t, i in mem)
            gap = max(gap, float(np.abs(s - self.model.unary[u]).max()))
        for e, mem in enumerate(self.edge_members):
            s = sum(self.pairwise[t][j] for t, j in mem)
            gap = max(gap, float(np.abs(s - self.model.pairwise[e]).max()))
        return gap


class SlaveSolution(NamedTuple):
    energies: list
    labelings: list

    def node_label(self, dec: Decomposition, t: int, u: int) -> int:
        return int(self.labelings[t][dec.slaves[t].nodes.index(u)])


def _validate(model: GraphicalModel, slaves: Sequence[Slave]) -> None:
    seen_n = np.zeros(model.node_count, dtype=bool)
    seen_e = np.zeros(model.edge_count, dtype=bool)
    for t, sl in enumerate(slaves):
        ns = set(sl.nodes)
        for e in sl.edges:
            u, v = model.edges[e]
            if u not in ns or v not in ns:
                raise InvalidStructureError(f"slave {t}: edge {e} leaves the slave")
        if len(sl.edges) != len(ns) - 1:
            raise InvalidStructureError(f"slave {t} is not a tree")
        seen_n[list(ns)] = True
        seen_e[list(sl.edges)] = True
    if not seen_n.all() or not seen_e.all():
        raise InvalidStructureError("every node and edge must belong to a slave")


def _slave(model, nodes, edges):
    return Slave(tuple(sorted(set(nodes))), tuple(edges))


def complete_structure(model: GraphicalModel) -> list:
    """One slave per node and one per edge."""
    out = [_slave(model, [u], []) for u in range(model.node_count)]
    out += [_slave(model, model.edges[e], [e]) for e in range(model.edge_count)]
    return out


def edge_structure(model: GraphicalModel) -> list:
    """One slave per edge plus a singleton for every isolated node."""
    out = [_slave(model, model.edges[e], [e]) for e in range(model.edge_count)]
    out += [_slave(model, [u], []) for u in range(model.node_count) if not model.adjacency[u]]
    return out


def chain_structure(model: GraphicalModel, order: Optional[Sequence[int]] = None) -> list:
    """Maximal monotonic chains grown greedily along ``order``."""
    n = model.node_count
    order = list(range(n)) if order is None else [int(u) for u in order]
    pos = {u: i for i, u in enumerate(order)}
    used = np.zeros(model.edge_count, dtype=bool)
    out = []
    for start in order:
        while True:
            nodes, edges, u = [start], [], start
            while True:
                nxt = [(pos[v], v, e) for v, e in model.adjacency[u]
                       if pos[v] > pos[u] and not used[e]]
                if not nxt:
                    break
                _, v, e = min(nxt)
                used[e] = True
                nodes.append(v)
                edges.append(e)
                u = v
            if not edges:
                break
            out.append(Slave(tuple(nodes), tuple(edges)))
    for u in range(n):
        if not model.adjacency[u]:
            out.append(Slave((u,), ()))
    return out


def grid_structure(height: int, width: int, model: GraphicalModel) -> list:
    """Row and column chains of a row-major 4-connected grid."""
    idx = np.arange(height * width).reshape(height, width)
    out = []
    for line in list(idx) + list(idx.T):
        nodes = [int(u) for u in line]
        edges = [model.edge_index[(min(a, b), max(a, b))] for a, b in zip(nodes, nodes[1:])]
        out.append(Slave(tuple(nodes), tuple(edges)))
    return out


def split_costs(model: GraphicalModel, slaves: Sequence[Slave], rho=None,
                costs: Optional[CostVector] = None) -> Decomposition:
    """Split master costs between slaves with weights ``rho``.

    Parameters
    ----------
    rho : callable, optional
        ``rho(kind, w, t)`` with ``kind`` in {"node", "edge"} returns the
        share of factor ``w`` given to slave ``t``. Shares of a factor must
        sum to one. Uniform by default.
    costs : CostVector, optional
        Costs to split instead of the model's own (e.g. reparametrized ones).
    """
    _validate(model, slaves)
    costs = model.costs if costs is None else costs
    dec = Decomposition(model, list(slaves),
                        [[None] * len(sl.nodes) for sl in slaves],
                        [[None] * len(sl.edges) for sl in slaves])

    def weights(kind, w, mem):
        if rho is None:
            return [1.0 / len(mem)] * len(mem)
        ws = [float(rho(kind, w, t)) for t, _ in mem]
        if min(ws) < 0 or abs(sum(ws) - 1.0) > 1e-12:
            raise InvalidWeightsError(f"{kind} {w}: weights {ws} must be >= 0 and sum to 1")
        return ws

    for u, mem in enumerate(dec.node_members):
        ws = weights("node", u, mem)
        acc = np.zeros(model.labels[u])
        for k, ((t, i), r) in enumerate(zip(mem, ws)):
            part = r * costs.unary[u] if k < len(mem) - 1 else costs.unary[u] - acc
            dec.unary[t][i] = np.array(part)
            acc = acc + part
    for e, mem in enumerate(dec.edge_members):
        ws = weights("edge", e, mem)
        acc = np.zeros_like(costs.pairwise[e])
        for k, ((t, j), r) in enumerate(zip(mem, ws)):
            part = r * costs.pairwise[e] if k < len(mem) - 1 else costs.pairwise[e] - acc
            dec.pairwise[t][j] = np.array(part)
            acc = acc + part
    return dec


def complete_decomposition(model: GraphicalModel,
                           costs: Optional[CostVector] = None) -> Decomposition:
    """Node and edge slaves; unary costs stay whole on the node slaves.

    With this split the slave optima are exactly the factor minima, so
    ``U`` equals the Lagrange dual of ``costs``.
    """
    slaves = complete_structure(model)
    return split_costs(model, slaves, lambda kind, w, t: float(kind == "edge" or
                                                               len(slaves[t].nodes) == 1),
                       costs)


def eval_U(dec: Decomposition):
    """Sum of slave optima and one optimal labeling per slave."""
    ens, ys = [], []
    for t in range(len(dec.slaves)):
        en, y = dp.solve_tree(dec.slave_model(t))
        ens.append(en)
        ys.append(y)
    return float(sum(ens)), SlaveSolution(ens, ys)


def subgradient_U_step(dec: Decomposition, alpha: float,
                       sol: Optional[SlaveSolution] = None) -> Decomposition:
    """One supergradient step on the slave costs (in place, also returned).

    For every shared node the first slave containing it is the anchor.
    Another slave gets ``+alpha`` on its own label where the anchor picked
    a different one and ``-alpha`` on the anchor's label; the anchor gets
    the opposite so the sum over slaves is unchanged.
    """
    if sol is None:
        sol = eval_U(dec)[1]
    for u, mem in enumerate(dec.node_members):
        if len(mem) < 2:
            continue
        ta, ia = mem[0]
        ya = int(sol.labelings[ta][ia])
        for t, i in mem[1:]:
            yt = int(sol.labelings[t][i])
            if yt == ya:
                continue
            dec.unary[t][i][yt] += alpha
            dec.unary[t][i][ya] -= alpha
            dec.unary[ta][ia][yt] -= alpha
            dec.unary[ta][ia][ya] += alpha
    for e, mem in enumerate(dec.edge_members):
        if len(mem) < 2:
            continue
        u, v = dec.model.edges[e]
        ta, ja = mem[0]
        sa = dec.slaves[ta]
        pa = (int(sol.labelings[ta][sa.nodes.index(u)]), int(sol.labelings[ta][sa.nodes.index(v)]))
        for t, j in mem[1:]:
            st = dec.slaves[t]
            pt = (int(sol.labelings[t][st.nodes.index(u)]), int(sol.labelings[t][st.nodes.index(v)]))
            if pt == pa:
                continue
            dec.pairwise[t][j][pt] += alpha
            dec.pairwise[t][j][pa] -= alpha
            dec.pairwise[ta][ja][pt] -= alpha
            dec.pairwise[ta][ja][pa] += alpha
    return dec


def dual_subgradient(model: GraphicalModel, phi: Reparametrization) -> Reparametrization:
    """Supergradient of the Lagrange dual at ``phi``.

    ``g_{u,v}(s) = [s = y''_u] - [s = y'_u]`` where ``y'`` is the best unary
    label and ``y''`` the row of the best pair on edge ``uv``.
    """
    costs = reparametrize(model, phi)
    g = Reparametrization(model)
    y1 = round_dual(costs)
    for e, (u, v) in enumerate(model.edges):
        m = costs.pairwise[e]
        s, t = np.unravel_index(int(np.argmin(m)), m.shape)
        g.slot(e, 0)[s] += 1.0
        g.slot(e, 0)[y1[u]] -= 1.0
        g.slot(e, 1)[t] += 1.0
        g.slot(e, 1)[y1[v]] -= 1.0
    return g


def step_size(t: int, beta: float, gamma: float) -> float:
    return beta * (1.0 + t) ** gamma


def run_subgradient(model: GraphicalModel, target="D", beta: float = 0.1, gamma: float = -1.0,
                    iters: int = 100, phi: Optional[Reparametrization] = None,
                    decomposition: Optional[Decomposition] = None, primal: bool = False):
    """Supergradient ascent with steps ``beta * (1 + t) ** gamma``.

    Parameters
    ----------
    target : {"D", "U"}
        Lagrange dual over ``phi`` or decomposition dual over slave costs.

    Returns
    -------
    state : Reparametrization or Decomposition
    trace : SolverTrace
        ``trace.meta["best_dual"]`` holds the best value seen.
    """
    if beta <= 0 or not (-1.0 <= gamma < 0.0):
        raise ValueError("need beta > 0 and -1 <= gamma < 0")
    trace = SolverTrace()
    t0 = time.perf_counter()
    best_primal, best_y = None, None
    if target == "D":
        state = Reparametrization(model) if phi is None else phi
        for t in range(iters):
            g = dual_subgradient(model, state)
            state.values += step_size(t, beta, gamma) * g.values
            d = dual(model, state)
            if primal:
                y = round_dual(reparametrize(model, state))
                en = energy(model, y)
                if best_primal is None or en < best_primal:
                    best_primal, best_y = en, y
            trace.append(t + 1, time.perf_counter() - t0, d, best_primal, None)
    elif target == "U":
        state = (split_costs(model, chain_structure(model)) if decomposition is None
                 else decomposition)
        for t in range(iters):
            u_val, sol = eval_U(state)
            subgradient_U_step(state, step_size(t, beta, gamma), sol)
            u_val = eval_U(state)[0]
            if primal:
                y = np.zeros(model.node_count, dtype=np.int64)
                for u, mem in enumerate(state.node_members):
                    ta, ia = mem[0]
                    y[u] = sol.labelings[ta][ia]
                en = energy(model, y)
                if best_primal is None or en < best_primal:
                    best_primal, best_y = en, y
            trace.append(t + 1, time.perf_counter() - t0, u_val, best_primal, None)
    else:
        raise ValueError(f"unknown target {target!r}")
    trace.meta["best_dual"] = trace.best_dual()
    trace.meta["best_labeling"] = best_y
    return state, trace


def slave_node_min_marginals(dec: Decomposition, t: int, unary=None) -> list:
    return dp.min_marginals_tree(dec.slave_model(t, unary)).node


def averaging_step(dec: Decomposition, u: int) -> Decomposition:
    """Equalize the min-marginals of node ``u`` across its slaves (in place).

    ``theta^t_u <- theta^t_u - E^t_u + mean_t' E^t'_u``.
    """
    mem = dec.node_members[u]
    if len(mem) < 2:
        return dec
    E = [slave_node_min_marginals(dec, t)[i] for t, i in mem]
    mean = sum(E) / len(E)
    for (t, i), Et in zip(mem, E):
        dec.unary[t][i] = dec.unary[t][i] - Et + mean
    return dec


def averaging_sweep(dec: Decomposition, order: Sequence[int]) -> Decomposition:
    for u in order:
        averaging_step(dec, int(u))
    return dec


def subproblem_agreement(dec: Decomposition, tol: float = 1e-9):
    """Weak agreement of slave optima via per-node supports.

    A label survives at a node of a slave iff some optimal labeling of that
    slave uses it while staying inside the surviving labels of all its
    nodes. On a tree this holds iff the restricted min-marginal still
    equals the unrestricted slave optimum. Supports are intersected across
    slaves until nothing changes.

    Returns
    -------
    agrees : bool
        True iff every node keeps a non-empty support.
    supports : list
        Per node, the boolean mask of surviving labels.
    """
    model = dec.model
    opt = eval_U(dec)[1].energies
    allowed = [np.ones(int(L), dtype=bool) for L in model.labels]
    cap = max(1, model.node_count * int(model.labels.max()) + 1)
    for _ in range(cap):
        new = [a.copy() for a in allowed]
        for t, sl in enumerate(dec.slaves):
            un = [np.where(allowed[u], dec.unary[t][i], dec.unary[t][i] + BIG)
                  for i, u in enumerate(sl.nodes)]
            mm = slave_node_min_marginals(dec, t, un)
            bound = opt[t] + tol * (1.0 + abs(opt[t]))
            for i, u in enumerate(sl.nodes):
                new[u] &= mm[i] <= bound
        if all(np.array_equal(a, b) for a, b in zip(new, allowed)):
            break
        allowed = new
        if not all(a.any() for a in allowed):
            break
    return all(a.any() for a in allowed), allowed
