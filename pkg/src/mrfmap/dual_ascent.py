"""Dual block-coordinate ascent: min-sum and anisotropic diffusion, SRMP/TRW-S.

All solvers work on a :class:`~mrfmap.model.Reparametrization` in place.
The per-node update is done by a sweep kernel that is compiled when the
extension is available and falls back to numpy otherwise; set the
environment variable ``MRFMAP_PURE_PYTHON=1`` to force the fallback.
"""
from __future__ import annotations

import csv
import os
import time
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence

import numpy as np

from . import _kernels_py
from .consistency import epsilon_level, minmax_relaxation, round_dual
from .model import (BIG, CostVector, GraphicalModel, InvalidModelError, Reparametrization,
                    energy, reparametrize)

if os.environ.get("MRFMAP_PURE_PYTHON") == "1":
    _kern = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as _kern
        BACKEND = "compiled"
    except ImportError:  # pragma: no cover - depends on the build
        _kern = _kernels_py
        BACKEND = "python"


def kernels(backend: Optional[str] = None):
    """Kernel module for ``backend`` ("python", "compiled" or the default)."""
    if backend is None:
        return _kern
    if backend == "python":
        return _kernels_py
    from . import _kernels
    return _kernels


class InvalidWeightsError(ValueError):
    pass


class TraceRow(NamedTuple):
    iter: int
    seconds: float
    dual: Optional[float]
    primal_best: Optional[float]
    epsilon: Optional[float]


@dataclass
class SolverTrace:
    """Per-iteration records of a solver run."""

    rows: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def append(self, *values) -> None:
        row = TraceRow(*values)
        if self.rows and row.iter <= self.rows[-1].iter:
            raise ValueError("trace iterations must increase")
        self.rows.append(row)

    @property
    def duals(self) -> list:
        return [r.dual for r in self.rows]

    @property
    def epsilons(self) -> list:
        return [r.epsilon for r in self.rows]

    def best_dual(self) -> Optional[float]:
        vals = [r.dual for r in self.rows if r.dual is not None]
        return max(vals) if vals else None

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(TraceRow._fields)
            for r in self.rows:
                w.writerow(["" if x is None else (repr(x) if isinstance(x, float) else x)
                            for x in r])


class DiffusionWeights:
    """Weight ``omega_{u,v}`` per directed slot, stored per incidence.

    ``values[k]`` belongs to the incidence ``k`` of the model's packed CSR
    layout, i.e. to node ``u`` and edge ``inc_edge[k]``.
    """

    def __init__(self, model: GraphicalModel, values):
        values = np.asarray(values, dtype=np.float64)
        pk = model.packed
        if values.shape != pk.inc_edge.shape:
            raise InvalidWeightsError("one weight per incidence is required")
        if (values < 0).any():
            raise InvalidWeightsError("weights must be non-negative")
        sums = np.add.reduceat(values, pk.inc_ptr[:-1]) if len(values) else np.zeros(0)
        deg = np.diff(pk.inc_ptr)
        sums = np.where(deg > 0, sums, 0.0)
        if (sums > 1.0 + 1e-12).any():
            u = int(np.argmax(sums))
            raise InvalidWeightsError(f"weights at node {u} sum to {sums[u]} > 1")
        self.model = model
        self.values = values

    @classmethod
    def from_function(cls, model: GraphicalModel, fn) -> "DiffusionWeights":
        """Build from ``fn(u, v) -> omega_{u,v}``."""
        pk = model.packed
        vals = np.zeros(len(pk.inc_edge))
        for u in range(model.node_count):
            for k in range(pk.inc_ptr[u], pk.inc_ptr[u + 1]):
                a, b = model.edges[pk.inc_edge[k]]
                vals[k] = fn(u, b if a == u else a)
        return cls(model, vals)

    @classmethod
    def minsum(cls, model: GraphicalModel) -> "DiffusionWeights":
        deg = np.diff(model.packed.inc_ptr)
        return cls.from_function(model, lambda u, v: 1.0 / deg[u])

    @classmethod
    def cmp(cls, model: GraphicalModel) -> "DiffusionWeights":
        deg = np.diff(model.packed.inc_ptr)
        return cls.from_function(model, lambda u, v: 1.0 / (deg[u] + 1))

    @classmethod
    def zeros(cls, model: GraphicalModel) -> "DiffusionWeights":
        return cls(model, np.zeros(len(model.packed.inc_edge)))

    @classmethod
    def chains(cls, model: GraphicalModel, order: Optional[Sequence[int]] = None,
               counts: Optional[np.ndarray] = None) -> "DiffusionWeights":
        """``1 / n_u`` towards neighbors later in ``order``, zero otherwise.

        On a chain in its natural order this puts all weight on the edge to
        the successor, which is dynamic programming written as diffusion.
        """
        order = list(range(model.node_count)) if order is None else list(order)
        pos = np.empty(model.node_count, dtype=np.int64)
        pos[order] = np.arange(len(order))
        n = chain_counts(model, order) if counts is None else np.asarray(counts)
        return cls.from_function(model, lambda u, v: 1.0 / n[u] if pos[v] > pos[u] else 0.0)

    @classmethod
    def named(cls, model: GraphicalModel, name: str) -> "DiffusionWeights":
        try:
            return {"minsum": cls.minsum, "cmp": cls.cmp, "chains": cls.chains}[name](model)
        except KeyError:
            raise InvalidWeightsError(f"unknown weight preset {name!r}") from None


def chain_counts(model: GraphicalModel, order: Optional[Sequence[int]] = None,
                 variant: str = "chains") -> np.ndarray:
    """Number of chains through every node.

    ``variant="chains"`` gives the maximal monotonic chain count
    ``max(#earlier neighbors, #later neighbors)``; ``variant="edges"`` gives
    the degree (edge decomposition). Both are clamped to at least one.
    """
    n = model.node_count
    if variant == "edges":
        return np.maximum(np.diff(model.packed.inc_ptr), 1)
    if variant != "chains":
        raise ValueError(f"unknown chain count variant {variant!r}")
    order = list(range(n)) if order is None else [int(u) for u in order]
    if sorted(order) != list(range(n)):
        raise InvalidModelError("order must be a permutation of the nodes")
    pos = np.empty(n, dtype=np.int64)
    pos[order] = np.arange(n)
    out = np.ones(n, dtype=np.int64)
    for u in range(n):
        before = sum(1 for v, _ in model.adjacency[u] if pos[v] < pos[u])
        after = len(model.adjacency[u]) - before
        out[u] = max(before, after, 1)
    return out


def _check_finite(model: GraphicalModel) -> None:
    for a in model.unary + model.pairwise:
        if (np.abs(a) >= BIG).any():
            raise InvalidModelError("dual solvers need finite costs; finitize the model first")


def dual(model: GraphicalModel, phi: Reparametrization) -> float:
    """Lagrange dual value computed by the sweep kernel."""
    return float(_kern.dual_value(model.packed, phi.values))


def diffusion_node_update(model: GraphicalModel, phi: Reparametrization, u: int,
                          weights: DiffusionWeights) -> Reparametrization:
    """One anisotropic diffusion step at node ``u`` (in place, also returned).

    All pencil minima are first pulled into ``u``; then the share
    ``omega_{u,v}`` of the resulting unary cost is pushed onto each edge.
    """
    _kern.node_sweep(model.packed, phi.values, np.array([u], dtype=np.int64), weights.values)
    return phi


def diffusion_round_prep(model: GraphicalModel, phi: Reparametrization) -> CostVector:
    """Reparametrized costs with half of every pencil minimum moved to the node.

    All pencil minima are taken from the current state and applied together.
    """
    costs = reparametrize(model, phi)
    out = phi.copy()
    for e, (u, v) in enumerate(model.edges):
        m = costs.pairwise[e]
        out.slot(e, 0)[:] -= 0.5 * m.min(axis=1)
        out.slot(e, 1)[:] -= 0.5 * m.min(axis=0)
    return reparametrize(model, out)


class _Loop:
    """Shared bookkeeping for the iterative dual solvers."""

    def __init__(self, model, iters, tol, track_epsilon, epsilon_every, stall_tol, primal):
        self.model = model
        self.iters = iters
        self.tol = tol
        self.track_epsilon = track_epsilon
        self.epsilon_every = max(1, epsilon_every)
        self.stall_tol = stall_tol
        self.primal = primal
        self.trace = SolverTrace()
        self.t0 = time.perf_counter()
        self.best_primal = None
        self.best_labeling = None

    def record(self, it, phi, prev_dual, round_fn) -> bool:
        """Append a trace row; return True when a stopping rule fires."""
        d = dual(self.model, phi)
        eps = None
        if self.track_epsilon and (it % self.epsilon_every == 0 or it == self.iters):
            eps = epsilon_level(minmax_relaxation(reparametrize(self.model, phi)))
        if self.primal:
            y = round_fn(phi)
            en = energy(self.model, y)
            if self.best_primal is None or en < self.best_primal:
                self.best_primal, self.best_labeling = en, y
        self.trace.append(it, time.perf_counter() - self.t0, d, self.best_primal, eps)
        if eps is not None and eps <= self.tol:
            self.trace.meta["stop"] = "epsilon"
            return True
        if self.stall_tol is not None and prev_dual is not None and d - prev_dual < self.stall_tol:
            self.trace.meta["stop"] = "stall"
            return True
        return False


def run_diffusion(model: GraphicalModel, weights="minsum", iters: int = 1000,
                  tol: float = 1e-6, phi: Optional[Reparametrization] = None,
                  order: Optional[Sequence[int]] = None, track_epsilon: bool = True,
                  epsilon_every: int = 1, stall_tol: Optional[float] = None,
                  primal: bool = False):
    """Cyclic anisotropic diffusion sweeps.

    Parameters
    ----------
    weights : DiffusionWeights or {"minsum", "cmp", "chains"}
    iters : int
        Maximal number of full sweeps.
    tol : float
        Stop once the epsilon of node-edge agreement is at most ``tol``.
    stall_tol : float, optional
        Also stop when a sweep raises the dual by less than this.
    primal : bool
        Round after every sweep (half-split prep, then naive) and keep the
        best energy in the trace.

    Returns
    -------
    phi : Reparametrization
    trace : SolverTrace
    """
    _check_finite(model)
    if isinstance(weights, str):
        weights = DiffusionWeights.named(model, weights)
    phi = Reparametrization(model) if phi is None else phi
    order = np.arange(model.node_count) if order is None else np.asarray(order, dtype=np.int64)
    loop = _Loop(model, iters, tol, track_epsilon, epsilon_every, stall_tol, primal)
    rnd = lambda p: round_dual(diffusion_round_prep(model, p))  # noqa: E731
    prev = dual(model, phi)
    loop.trace.meta["initial_dual"] = prev
    for it in range(1, iters + 1):
        _kern.node_sweep(model.packed, phi.values, order, weights.values)
        if loop.record(it, phi, prev, rnd):
            break
        prev = loop.trace.rows[-1].dual
    loop.trace.meta["best_labeling"] = loop.best_labeling
    return phi, loop.trace


def srmp_pass_weights(model: GraphicalModel, order, counts) -> np.ndarray:
    pos = np.empty(model.node_count, dtype=np.int64)
    pos[np.asarray(order)] = np.arange(len(order))
    pk = model.packed
    w = np.zeros(len(pk.inc_edge))
    for u in range(model.node_count):
        for k in range(pk.inc_ptr[u], pk.inc_ptr[u + 1]):
            a, b = model.edges[pk.inc_edge[k]]
            v = b if a == u else a
            if pos[v] > pos[u]:
                w[k] = 1.0 / counts[u]
    return w


def srmp_pass(model: GraphicalModel, phi: Reparametrization, order, counts) -> Reparametrization:
    """One directional SRMP pass over ``order`` (in place)."""
    order = np.asarray(order, dtype=np.int64)
    _kern.node_sweep(model.packed, phi.values, order, srmp_pass_weights(model, order, counts))
    return phi


def run_srmp(model: GraphicalModel, counts: Optional[np.ndarray] = None, iters: int = 1000,
             tol: float = 1e-6, phi: Optional[Reparametrization] = None,
             order: Optional[Sequence[int]] = None, track_epsilon: bool = True,
             epsilon_every: int = 1, stall_tol: Optional[float] = None,
             primal: bool = False):
    """Sequential reweighted message passing.

    Every iteration is one pass over the nodes; the direction flips after
    each pass. At node ``u`` all pencil minima are pulled into the node and
    ``1 / counts[u]`` of the result is pushed to every later neighbor.

    Returns
    -------
    phi : Reparametrization
    trace : SolverTrace
        ``trace.meta["last_order"]`` is the order of the final pass, which
        is what :func:`srmp_round` needs.
    """
    _check_finite(model)
    order = np.arange(model.node_count) if order is None else np.asarray(order, dtype=np.int64)
    counts = chain_counts(model, order) if counts is None else np.asarray(counts)
    if (counts < 1).any():
        raise InvalidModelError("chain counts must be positive")
    phi = Reparametrization(model) if phi is None else phi
    w_fwd = srmp_pass_weights(model, order, counts)
    w_bwd = srmp_pass_weights(model, order[::-1], counts)
    loop = _Loop(model, iters, tol, track_epsilon, epsilon_every, stall_tol, primal)
    state = {"order": order}
    rnd = lambda p: srmp_round(model, p, state["order"])  # noqa: E731
    prev = dual(model, phi)
    loop.trace.meta["initial_dual"] = prev
    for it in range(1, iters + 1):
        fwd = it % 2 == 1
        cur = order if fwd else order[::-1]
        state["order"] = cur
        _kern.node_sweep(model.packed, phi.values, np.ascontiguousarray(cur),
                         w_fwd if fwd else w_bwd)
        loop.trace.meta["last_order"] = cur.copy()
        # the stall rule compares full forward+backward iterations
        if loop.record(it, phi, None if fwd else prev, rnd):
            break
        if not fwd:
            prev = loop.trace.rows[-1].dual
    loop.trace.meta["best_labeling"] = loop.best_labeling
    return phi, loop.trace


def srmp_round(model: GraphicalModel, phi: Reparametrization, order=None) -> np.ndarray:
    """Labeling after an SRMP pass over ``order``.

    The last node takes its best reparametrized label; going backwards,
    each node adds the original pairwise costs towards its already labeled
    later neighbors and the incoming messages ``-phi_{u,v}`` from earlier ones.
    """
    n = model.node_count
    order = list(range(n)) if order is None else [int(u) for u in order]
    pos = np.empty(n, dtype=np.int64)
    pos[order] = np.arange(n)
    y = np.zeros(n, dtype=np.int64)
    for i in range(n - 1, -1, -1):
        u = order[i]
        c = np.array(model.unary[u])
        for v, _ in model.adjacency[u]:
            if i == n - 1 or pos[v] < pos[u]:
                c -= phi.phi(u, v)
            else:
                c += model.pair(u, v)[:, y[v]]
        y[u] = int(np.argmin(c))
    return y


def trws_messages(model: GraphicalModel, counts: np.ndarray, passes: int,
                  order: Optional[Sequence[int]] = None):
    """Message form of SRMP: forward/backward min-marginal messages.

    Returns the final reparametrization built from the messages and the
    message dictionary ``msg[(u, v)]`` (into ``v`` from ``u``).
    """
    n = model.node_count
    order = list(range(n)) if order is None else [int(u) for u in order]
    msg = {}
    for u, v in model.edges:
        msg[(u, v)] = np.zeros(model.labels[v])
        msg[(v, u)] = np.zeros(model.labels[u])
    hat = [None] * n
    cur = list(order)
    for _ in range(passes):
        pos = {u: i for i, u in enumerate(cur)}
        for u in cur:
            h = np.array(model.unary[u])
            for v, _ in model.adjacency[u]:
                h = h + msg[(v, u)]
            hat[u] = h
            for v, _ in model.adjacency[u]:
                if pos[v] > pos[u]:
                    tab = (h / counts[u] - msg[(v, u)])[:, None] + model.pair(u, v)
                    msg[(u, v)] = tab.min(axis=0)
        last = cur
        cur = cur[::-1]
    phi = Reparametrization(model)
    pos = {u: i for i, u in enumerate(last)}
    for u, v in model.edges:
        a, b = (u, v) if pos[u] < pos[v] else (v, u)
        phi.phi(b, a)[:] = -msg[(a, b)]
        phi.phi(a, b)[:] = hat[a] / counts[a] - msg[(b, a)]
    return phi, msg
