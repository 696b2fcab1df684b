"""Core data types for pairwise graphical models.

A model is an undirected graph with a finite label set per node, a unary
cost vector per node and a pairwise cost matrix per edge. Edges are stored
with ``u < v``; the matrix of edge ``(u, v)`` is indexed ``[y_u, y_v]``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Optional, Sequence

import numpy as np

#: Finite stand-in for an infinite cost. Subtraction of true ``inf`` yields NaN.
BIG = 1e15

#: Default tolerance for floating point comparisons.
TOL = 1e-9


class InvalidModelError(ValueError):
    """Raised when a model, labeling or cost vector is malformed."""


class InvalidStructureError(ValueError):
    """Raised when a graph does not have the structure an algorithm needs."""


def _frozen(a, ndim):
    arr = np.array(a, dtype=np.float64)
    if arr.ndim != ndim:
        raise InvalidModelError(f"expected a {ndim}-d cost array, got shape {arr.shape}")
    if np.isnan(arr).any():
        raise InvalidModelError("costs must not be NaN")
    arr = np.where(np.isinf(arr), np.sign(arr) * BIG, arr)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class CostVector:
    """Unary vectors and pairwise matrices with the layout of a model."""

    unary: tuple
    pairwise: tuple
    edges: Optional[tuple] = None

    def copy(self) -> "CostVector":
        return CostVector(tuple(np.array(a) for a in self.unary),
                          tuple(np.array(a) for a in self.pairwise), self.edges)

    def __add__(self, other: "CostVector") -> "CostVector":
        return CostVector(tuple(a + b for a, b in zip(self.unary, other.unary)),
                          tuple(a + b for a, b in zip(self.pairwise, other.pairwise)),
                          self.edges)

    def max_abs(self) -> float:
        vals = [np.abs(a).max() for a in self.unary + self.pairwise if a.size]
        return float(max(vals)) if vals else 0.0


@dataclass(frozen=True)
class Packed:
    """Flat array view of a model used by the sweep kernels.

    Slot ``2e`` of edge ``e = (u, v)`` holds phi_{u,v} (length L_u) and slot
    ``2e + 1`` holds phi_{v,u} (length L_v).
    """

    labels: np.ndarray
    u_off: np.ndarray
    unary: np.ndarray
    e_off: np.ndarray
    pair: np.ndarray
    slot_off: np.ndarray
    edge_u: np.ndarray
    edge_v: np.ndarray
    inc_ptr: np.ndarray
    inc_edge: np.ndarray
    inc_side: np.ndarray


class GraphicalModel:
    """Pairwise graphical model (graph, label counts, unary and pairwise costs).

    Parameters
    ----------
    labels : sequence of int
        Number of labels ``L_u >= 1`` per node.
    edges : sequence of (int, int)
        Undirected edges. Pairs with ``u > v`` are flipped together with
        their cost matrix.
    unary : sequence of array_like
        Cost vector of length ``L_u`` per node.
    pairwise : sequence of array_like
        Cost matrix of shape ``(L_u, L_v)`` per edge, given in the
        orientation of ``edges``.

    Notes
    -----
    ``inf`` entries are replaced by :data:`BIG`. Instances are immutable.
    """

    def __init__(self, labels: Sequence[int], edges: Iterable, unary: Sequence,
                 pairwise: Sequence):
        labels = np.asarray(labels, dtype=np.int64).reshape(-1)
        if (labels < 1).any():
            raise InvalidModelError("every node needs at least one label")
        n = len(labels)
        edges = [tuple(int(x) for x in e) for e in edges]
        pairwise = list(pairwise)
        if len(pairwise) != len(edges):
            raise InvalidModelError("one pairwise matrix per edge is required")
        if len(unary) != n:
            raise InvalidModelError("one unary vector per node is required")
        canon, mats, seen = [], [], set()
        for (u, v), mat in zip(edges, pairwise):
            mat = np.asarray(mat, dtype=np.float64)
            if u == v:
                raise InvalidModelError(f"self-loop at node {u}")
            if not (0 <= u < n and 0 <= v < n):
                raise InvalidModelError(f"edge ({u}, {v}) out of range")
            if u > v:
                u, v, mat = v, u, mat.T
            if (u, v) in seen:
                raise InvalidModelError(f"duplicate edge ({u}, {v})")
            seen.add((u, v))
            if mat.shape != (labels[u], labels[v]):
                raise InvalidModelError(
                    f"edge ({u}, {v}): matrix shape {mat.shape} does not match "
                    f"labels ({labels[u]}, {labels[v]})")
            canon.append((u, v))
            mats.append(_frozen(mat, 2))
        un = []
        for u, vec in enumerate(unary):
            vec = _frozen(vec, 1)
            if vec.shape != (labels[u],):
                raise InvalidModelError(f"node {u}: unary length {vec.shape[0]} != {labels[u]}")
            un.append(vec)
        labels.setflags(write=False)
        self.labels = labels
        self.edges = tuple(canon)
        self.unary = tuple(un)
        self.pairwise = tuple(mats)

    @classmethod
    def from_costs(cls, like: "GraphicalModel", costs: CostVector) -> "GraphicalModel":
        """Model with the structure of ``like`` and the given costs."""
        return cls(like.labels, like.edges, costs.unary, costs.pairwise)

    @property
    def node_count(self) -> int:
        return len(self.labels)

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    @property
    def costs(self) -> CostVector:
        return CostVector(self.unary, self.pairwise, self.edges)

    @cached_property
    def adjacency(self) -> tuple:
        """Per node, a tuple of ``(neighbor, edge index)`` pairs in edge order."""
        adj = [[] for _ in range(self.node_count)]
        for e, (u, v) in enumerate(self.edges):
            adj[u].append((v, e))
            adj[v].append((u, e))
        return tuple(tuple(a) for a in adj)

    def neighbors(self, u: int) -> list:
        return [v for v, _ in self.adjacency[u]]

    @cached_property
    def edge_index(self) -> dict:
        return {e: i for i, e in enumerate(self.edges)}

    def pair(self, u: int, v: int) -> np.ndarray:
        """Cost matrix indexed ``[y_u, y_v]`` regardless of storage orientation."""
        if u < v:
            return self.pairwise[self.edge_index[(u, v)]]
        return self.pairwise[self.edge_index[(v, u)]].T

    @cached_property
    def packed(self) -> Packed:
        n, m = self.node_count, self.edge_count
        L = np.asarray(self.labels, dtype=np.int64)
        u_off = np.zeros(n + 1, dtype=np.int64)
        u_off[1:] = np.cumsum(L)
        eu = np.array([e[0] for e in self.edges], dtype=np.int64)
        ev = np.array([e[1] for e in self.edges], dtype=np.int64)
        e_off = np.zeros(m + 1, dtype=np.int64)
        if m:
            e_off[1:] = np.cumsum(L[eu] * L[ev])
        slot_len = np.empty(2 * m, dtype=np.int64)
        slot_len[0::2] = L[eu]
        slot_len[1::2] = L[ev]
        slot_off = np.zeros(2 * m + 1, dtype=np.int64)
        slot_off[1:] = np.cumsum(slot_len)
        deg = np.zeros(n, dtype=np.int64)
        np.add.at(deg, eu, 1)
        np.add.at(deg, ev, 1)
        inc_ptr = np.zeros(n + 1, dtype=np.int64)
        inc_ptr[1:] = np.cumsum(deg)
        inc_edge = np.empty(2 * m, dtype=np.int64)
        inc_side = np.empty(2 * m, dtype=np.int64)
        fill = inc_ptr[:-1].copy()
        for u, nb in enumerate(self.adjacency):
            for k, (v, e) in enumerate(nb):
                inc_edge[fill[u] + k] = e
                inc_side[fill[u] + k] = 0 if u < v else 1
        unary = np.concatenate(self.unary) if n else np.zeros(0)
        pair = (np.concatenate([p.ravel() for p in self.pairwise]) if m
                else np.zeros(0))
        return Packed(L, u_off, unary, e_off, pair, slot_off, eu, ev,
                      inc_ptr, inc_edge, inc_side)

    def cost_footprint(self) -> int:
        """Bytes used by the unary and pairwise cost arrays."""
        return int(sum(a.nbytes for a in self.unary + self.pairwise))

    def label_space_size(self) -> int:
        return int(np.prod([int(x) for x in self.labels], dtype=object))

    def __repr__(self) -> str:
        return (f"GraphicalModel(nodes={self.node_count}, edges={self.edge_count}, "
                f"max_labels={int(self.labels.max()) if self.node_count else 0})")


def check_labeling(model: GraphicalModel, y) -> np.ndarray:
    """Return ``y`` as an int array after validating it against ``model``."""
    y = np.asarray(y)
    if y.shape != (model.node_count,):
        raise InvalidModelError(f"labeling has shape {y.shape}, expected ({model.node_count},)")
    if y.dtype.kind not in "iu":
        if not np.all(np.equal(np.mod(y, 1), 0)):
            raise InvalidModelError("labels must be integers")
        y = y.astype(np.int64)
    if (y < 0).any() or (y >= model.labels).any():
        raise InvalidModelError("label out of range")
    return y.astype(np.int64)


@dataclass(frozen=True)
class PartialLabeling:
    """Labels for a subset of nodes, ``assignment[i]`` belongs to ``domain[i]``."""

    domain: tuple
    assignment: tuple

    def __post_init__(self):
        if len(set(self.domain)) != len(self.domain):
            raise InvalidModelError("partial labeling domain has repeated nodes")
        if len(self.domain) != len(self.assignment):
            raise InvalidModelError("domain and assignment lengths differ")

    def as_dict(self) -> dict:
        return dict(zip(self.domain, self.assignment))

    def validate(self, model: GraphicalModel) -> None:
        for u, s in zip(self.domain, self.assignment):
            if not (0 <= u < model.node_count and 0 <= s < model.labels[u]):
                raise InvalidModelError(f"partial labeling entry ({u}, {s}) out of range")


@dataclass
class RelaxedLabeling:
    """Point of the local polytope candidate set: per-node and per-edge marginals."""

    node_part: list
    edge_part: list


def energy(model: GraphicalModel, y) -> float:
    """Total cost of labeling ``y``.

    Any term at or above :data:`BIG` forces the result to be at least ``BIG``.
    """
    y = check_labeling(model, y)
    total = 0.0
    hit_big = False
    for u, th in enumerate(model.unary):
        c = th[y[u]]
        hit_big |= c >= BIG
        total += c
    for (u, v), th in zip(model.edges, model.pairwise):
        c = th[y[u], y[v]]
        hit_big |= c >= BIG
        total += c
    total = float(total)
    return max(total, BIG) if hit_big else total


def energies(model: GraphicalModel, ys: np.ndarray) -> np.ndarray:
    """Vectorized energy for a ``(k, n)`` array of labelings (no BIG saturation)."""
    ys = np.asarray(ys, dtype=np.int64)
    out = np.zeros(len(ys))
    for u, th in enumerate(model.unary):
        out += th[ys[:, u]]
    for (u, v), th in zip(model.edges, model.pairwise):
        out += th[ys[:, u], ys[:, v]]
    return out


def indicator(model: GraphicalModel, y) -> RelaxedLabeling:
    """Binary indicator vector delta(y) over all node and edge coordinates."""
    y = check_labeling(model, y)
    nodes = []
    for u in range(model.node_count):
        a = np.zeros(model.labels[u])
        a[y[u]] = 1.0
        nodes.append(a)
    edges = []
    for u, v in model.edges:
        a = np.zeros((model.labels[u], model.labels[v]))
        a[y[u], y[v]] = 1.0
        edges.append(a)
    return RelaxedLabeling(nodes, edges)


class Reparametrization:
    """Dual vector phi with one real vector per directed edge slot.

    ``phi(u, v)`` is the vector phi_{u,v} of length ``L_u`` that lives on the
    edge between ``u`` and ``v`` on the side of ``u``.
    """

    def __init__(self, model: GraphicalModel, values=None):
        self._model = model
        size = int(model.packed.slot_off[-1])
        if values is None:
            self.values = np.zeros(size)
        else:
            values = np.asarray(values, dtype=np.float64)
            if values.shape != (size,):
                raise InvalidModelError(f"phi has {values.shape} entries, expected {size}")
            if not np.isfinite(values).all():
                raise InvalidModelError("phi entries must be finite")
            self.values = values.copy()

    @property
    def model(self) -> GraphicalModel:
        return self._model

    @classmethod
    def zeros(cls, model: GraphicalModel) -> "Reparametrization":
        return cls(model)

    def slot(self, e: int, side: int) -> np.ndarray:
        off = self._model.packed.slot_off
        return self.values[off[2 * e + side]:off[2 * e + side + 1]]

    def phi(self, u: int, v: int) -> np.ndarray:
        """View of phi_{u,v}; writes go through to the underlying storage."""
        e = self._model.edge_index[(min(u, v), max(u, v))]
        return self.slot(e, 0 if u < v else 1)

    def copy(self) -> "Reparametrization":
        return Reparametrization(self._model, self.values)

    def __add__(self, other: "Reparametrization") -> "Reparametrization":
        return Reparametrization(self._model, self.values + other.values)

    def __sub__(self, other: "Reparametrization") -> "Reparametrization":
        return Reparametrization(self._model, self.values - other.values)


def reparametrize(model: GraphicalModel, phi: Reparametrization) -> CostVector:
    """Reparametrized costs theta^phi.

    ``theta_u(s) - sum_v phi_{u,v}(s)`` on nodes and
    ``theta_uv(s, t) + phi_{u,v}(s) + phi_{v,u}(t)`` on edges.

    Raises
    ------
    InvalidModelError
        If a BIG unary cost meets a nonzero phi entry.
    """
    unary = [np.array(a) for a in model.unary]
    pairwise = []
    for e, (u, v) in enumerate(model.edges):
        a, b = phi.slot(e, 0), phi.slot(e, 1)
        unary[u] -= a
        unary[v] -= b
        pairwise.append(model.pairwise[e] + a[:, None] + b[None, :])
    for u, th in enumerate(model.unary):
        if (th >= BIG).any():
            touched = any(np.any(phi.phi(u, v)[th >= BIG] != 0) for v in model.neighbors(u))
            if touched:
                raise InvalidModelError(f"node {u}: BIG unary cost combined with nonzero phi")
    return CostVector(tuple(unary), tuple(pairwise), model.edges)


def check_local_polytope(model: GraphicalModel, mu: RelaxedLabeling, tol: float = TOL) -> bool:
    """True iff ``mu`` is non-negative, normalized and coupled within ``tol``."""
    if len(mu.node_part) != model.node_count or len(mu.edge_part) != model.edge_count:
        return False
    for u, m in enumerate(mu.node_part):
        m = np.asarray(m, dtype=np.float64)
        if m.shape != (model.labels[u],):
            return False
        if (m < -tol).any() or abs(m.sum() - 1.0) > tol:
            return False
    for (u, v), m in zip(model.edges, mu.edge_part):
        m = np.asarray(m, dtype=np.float64)
        if m.shape != (model.labels[u], model.labels[v]):
            return False
        if (m < -tol).any() or abs(m.sum() - 1.0) > tol:
            return False
        if np.abs(m.sum(axis=1) - mu.node_part[u]).max() > tol:
            return False
        if np.abs(m.sum(axis=0) - mu.node_part[v]).max() > tol:
            return False
    return True


def relaxed_energy(model: GraphicalModel, mu: RelaxedLabeling) -> float:
    """Inner product of the costs with ``mu``.

    A BIG cost under a non-zero coordinate makes the result at least BIG.
    """
    total = 0.0
    hit_big = False
    for th, m in zip(model.unary + model.pairwise,
                     list(mu.node_part) + list(mu.edge_part)):
        m = np.asarray(m, dtype=np.float64)
        hit_big |= bool(((th >= BIG) & (m != 0)).any())
        total += float(np.sum(th * m))
    return max(total, BIG) if hit_big else total


def inner(costs: CostVector, mu: RelaxedLabeling) -> float:
    """Inner product of an arbitrary cost vector with ``mu``."""
    total = sum(float(np.dot(a, m)) for a, m in zip(costs.unary, mu.node_part))
    total += sum(float(np.sum(a * m)) for a, m in zip(costs.pairwise, mu.edge_part))
    return total
