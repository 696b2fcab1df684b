"""Exhaustive enumeration oracle."""
from __future__ import annotations

from typing import NamedTuple, Optional

import numpy as np

from ..model import GraphicalModel

DEFAULT_CAP = 10 ** 7
_CHUNK = 1 << 16


class OracleRefused(RuntimeError):
    """Raised when the label space exceeds the enumeration cap."""


class BruteForceResult(NamedTuple):
    energy: float
    labeling: np.ndarray
    argmin_set: Optional[np.ndarray]


def _chunks(model: GraphicalModel, cap: int):
    total = model.label_space_size()
    if total > cap:
        raise OracleRefused(f"label space {total} exceeds cap {cap}")
    dims = tuple(int(x) for x in model.labels)
    for start in range(0, total, _CHUNK):
        idx = np.arange(start, min(total, start + _CHUNK))
        if dims:
            ys = np.stack(np.unravel_index(idx, dims), axis=1)
        else:
            ys = np.zeros((len(idx), 0), dtype=np.int64)
        yield ys, _energies(model, ys)


def _energies(model, ys):
    out = np.zeros(len(ys))
    for u, th in enumerate(model.unary):
        out += th[ys[:, u]]
    for (u, v), th in zip(model.edges, model.pairwise):
        out += th[ys[:, u], ys[:, v]]
    return out


def brute_force(model: GraphicalModel, cap: int = DEFAULT_CAP,
                want_all: bool = False, tol: float = 0.0) -> BruteForceResult:
    """Exact minimum by enumeration in lexicographic order.

    The first minimizer in lexicographic order (node 0 most significant) is
    returned. With ``want_all`` every labeling within ``tol`` of the optimum
    is returned as well.
    """
    best, best_y = np.inf, None
    for ys, en in _chunks(model, cap):
        k = int(np.argmin(en))
        if en[k] < best:
            best, best_y = float(en[k]), ys[k].copy()
    argmin = None
    if want_all:
        argmin = np.concatenate([ys[en <= best + tol] for ys, en in _chunks(model, cap)])
    return BruteForceResult(best, best_y, argmin)


def brute_force_min_marginals(model: GraphicalModel, cap: int = DEFAULT_CAP):
    """Node and edge min-marginals by enumeration.

    Returns ``(node, edge)`` where ``node[u][s]`` is the best energy with
    ``y_u = s`` and ``edge[e][s, t]`` the best energy with the pair fixed.
    """
    node = [np.full(int(L), np.inf) for L in model.labels]
    edge = [np.full(p.shape, np.inf) for p in model.pairwise]
    for ys, en in _chunks(model, cap):
        for u in range(model.node_count):
            np.minimum.at(node[u], ys[:, u], en)
        for e, (u, v) in enumerate(model.edges):
            np.minimum.at(edge[e], (ys[:, u], ys[:, v]), en)
    return node, edge


def brute_force_restricted(model: GraphicalModel, fixed: dict, cap: int = DEFAULT_CAP) -> float:
    """Best energy among labelings that agree with ``fixed`` (node -> label)."""
    best = np.inf
    for ys, en in _chunks(model, cap):
        mask = np.ones(len(ys), dtype=bool)
        for u, s in fixed.items():
            mask &= ys[:, u] == s
        if mask.any():
            best = min(best, float(en[mask].min()))
    return best
