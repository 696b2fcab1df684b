"""Move-making heuristics: alpha-expansion and alpha-beta-swap."""
from __future__ import annotations

import time

import numpy as np

from ..dual_ascent import SolverTrace
from ..model import GraphicalModel, InvalidModelError, PartialLabeling, check_labeling, energy
from ..primal import conditional_costs
from .qpbo import fusion_move, restrict
from .reductions import is_submodular, metric_check, solve_binary


class NonSubmodularMoveError(ValueError):
    pass


def _uniform(model: GraphicalModel) -> int:
    if model.node_count == 0:
        return 0
    L = int(model.labels[0])
    if (model.labels != L).any():
        raise InvalidModelError("move-making needs the same label set at every node")
    return L


def _best_move(model, y, free_mask, lab0, strict):
    """Optimal binary move on ``free_mask`` between ``lab0`` (bit 0) and ``y`` (bit 1)."""
    dom = tuple(int(u) for u in np.flatnonzero(~free_mask))
    sub, free, _ = conditional_costs(model, PartialLabeling(dom, tuple(int(y[u]) for u in dom)))
    if len(free) == 0:
        return y
    a, b = lab0[free], y[free]
    bm = restrict(sub, a, b)
    out = y.copy()
    if all(is_submodular(th) for th in bm.pairwise):
        bits = solve_binary(bm).labeling
        out[free] = np.where(bits == 0, a, b)
    elif strict:
        raise NonSubmodularMoveError("move subproblem is not submodular")
    else:
        out[free] = fusion_move(sub, b, a)
    return out


def alpha_expansion(model: GraphicalModel, y0=None, max_rounds: int = 100,
                    strict: bool = False):
    """Cycle over labels, letting every node switch to ``alpha`` in one cut.

    A move is kept only if it strictly lowers the energy. Moves whose binary
    subproblem is not submodular are solved by a fusion move, or raise
    :class:`NonSubmodularMoveError` when ``strict`` is set.

    Returns
    -------
    y : ndarray
    trace : SolverTrace
        One row per move with the current energy in ``primal_best``.
    """
    L = _uniform(model)
    y = np.zeros(model.node_count, dtype=np.int64) if y0 is None else check_labeling(model, y0).copy()
    t0 = time.perf_counter()
    trace = SolverTrace(meta={"solver": "alpha-expansion"})
    cur = energy(model, y)
    trace.append(0, 0.0, None, cur, None)
    it = 0
    free = np.ones(model.node_count, dtype=bool)
    for _ in range(max_rounds):
        changed = False
        for alpha in range(L):
            it += 1
            cand = _best_move(model, y, free, np.full(model.node_count, alpha), strict)
            e = energy(model, cand)
            if e < cur - 1e-12 * (1.0 + abs(cur)):
                y, cur, changed = cand, e, True
            trace.append(it, time.perf_counter() - t0, None, cur, None)
        if not changed:
            break
    return y, trace


def alpha_beta_swap(model: GraphicalModel, y0=None, max_rounds: int = 100):
    """Cycle over label pairs, re-labelling the nodes that hold either one.

    Raises
    ------
    InvalidModelError
        If some pairwise cost matrix is not a semimetric.
    """
    L = _uniform(model)
    for e, th in enumerate(model.pairwise):
        if metric_check(th) == "neither":
            raise InvalidModelError(f"edge {e} costs are not a semimetric")
    y = np.zeros(model.node_count, dtype=np.int64) if y0 is None else check_labeling(model, y0).copy()
    t0 = time.perf_counter()
    trace = SolverTrace(meta={"solver": "alpha-beta-swap"})
    cur = energy(model, y)
    trace.append(0, 0.0, None, cur, None)
    it = 0
    for _ in range(max_rounds):
        changed = False
        for alpha in range(L):
            for beta in range(alpha + 1, L):
                it += 1
                free = (y == alpha) | (y == beta)
                # bit 0 is alpha, bit 1 is beta
                lab0 = np.full(model.node_count, alpha)
                yb = np.where(free, beta, y)
                cand = _best_move(model, yb, free, lab0, strict=True) if free.any() else y
                e = energy(model, cand)
                if e < cur - 1e-12 * (1.0 + abs(cur)):
                    y, cur, changed = cand, e, True
                trace.append(it, time.perf_counter() - t0, None, cur, None)
        if not changed:
            break
    return y, trace
