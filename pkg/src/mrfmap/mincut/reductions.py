"""Energy to s-t cut translation and label-set reductions."""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from ..model import BIG, TOL, GraphicalModel, InvalidModelError
from .maxflow import SINK, SOURCE, STGraph, max_flow


class SubmodularityError(ValueError):
    pass


def is_submodular(theta, tol: float = 0.0) -> bool:
    """True iff every adjacent mixed second difference is non-positive."""
    th = np.asarray(theta, dtype=np.float64)
    if th.shape[0] < 2 or th.shape[1] < 2:
        return True
    d = th[:-1, :-1] + th[1:, 1:] - th[1:, :-1] - th[:-1, 1:]
    return bool((d <= tol).all())


class DiagonalForm(NamedTuple):
    unary_u: np.ndarray
    unary_v: np.ndarray
    pairwise: np.ndarray
    phi_uv: np.ndarray
    phi_vu: np.ndarray
    constant: float


def to_diagonal_form(theta_uv, theta_u, theta_v) -> DiagonalForm:
    """Reparametrize a binary factor so only the (0, 1) entry is non-zero.

    That entry becomes ``th(0,1) + th(1,0) - th(1,1) - th(0,0)``; both unary
    vectors are then shifted to have minimum zero and the shift goes into
    ``constant``. For every labeling the total cost is preserved.
    """
    th = np.asarray(theta_uv, dtype=np.float64)
    if th.shape != (2, 2):
        raise InvalidModelError("diagonal form needs a 2x2 factor")
    phi_uv = np.array([th[1, 0] - th[0, 0], 0.0])
    phi_vu = np.array([-th[1, 0], -th[1, 1]])
    pw = th + phi_uv[:, None] + phi_vu[None, :]
    pw[0, 0] = pw[1, 0] = pw[1, 1] = 0.0
    un_u = np.asarray(theta_u, dtype=np.float64) - phi_uv
    un_v = np.asarray(theta_v, dtype=np.float64) - phi_vu
    c = float(un_u.min() + un_v.min())
    return DiagonalForm(un_u - un_u.min(), un_v - un_v.min(), pw, phi_uv, phi_vu, c)


def _split_parallel(th):
    """Write a submodular 2x2 factor as ``a + p x_u + q x_v + b' ~x_u x_v + c' x_u ~x_v``.

    Used for factors with BIG entries, where the diagonal form would
    subtract BIG from BIG.
    """
    a, b, c, d = th[0, 0], th[0, 1], th[1, 0], th[1, 1]
    q = min(max(0.0, d - c), b - a)
    p = d - a - q
    return a, p, q, b - a - q, c - d + q


def _has_big(th):
    return bool((np.abs(th) >= BIG).any())


def binary_to_cut(model: GraphicalModel) -> STGraph:
    """s-t graph whose cut values plus offset equal the energies.

    Node ``u`` on the source side means ``y_u = 0``.

    Raises
    ------
    SubmodularityError
        If some pairwise factor is not submodular.
    """
    if (model.labels != 2).any():
        raise InvalidModelError("binary_to_cut needs two labels per node")
    g = STGraph(model.node_count)
    un = [np.array(a) for a in model.unary]
    for e, ((u, v), th) in enumerate(zip(model.edges, model.pairwise)):
        if not is_submodular(th):
            raise SubmodularityError(f"edge {e} ({u}, {v}) is not submodular")
        if _has_big(th):
            a, p, q, b1, c1 = _split_parallel(th)
            g.add_constant(a)
            un[u][1] += p
            un[v][1] += q
            g.add_arc(u, v, b1)
            g.add_arc(v, u, c1)
        else:
            df = to_diagonal_form(th, np.zeros(2), np.zeros(2))
            un[u] += df.unary_u
            un[v] += df.unary_v
            g.add_constant(df.constant)
            g.add_arc(u, v, max(df.pairwise[0, 1], 0.0))
    for u, c in enumerate(un):
        m = float(c.min())
        g.add_constant(m)
        g.add_arc(SOURCE, u, c[1] - m)
        g.add_arc(u, SINK, c[0] - m)
    return g


class BinarySolution(NamedTuple):
    energy: float
    labeling: np.ndarray
    cut: float
    offset: float


def solve_binary(model: GraphicalModel) -> BinarySolution:
    """Exact minimum of a submodular binary model by one max-flow."""
    from ..model import energy
    g = binary_to_cut(model)
    res = max_flow(g)
    y = res.side.astype(np.int64)
    return BinarySolution(energy(model, y), y, res.flow, g.constant_offset)


@dataclass
class LabelMapping:
    """Correspondence between a multi-label model and its binary encoding.

    Binary node ``base[u] + l`` stands for ``[y_u <= l]``; the top indicator
    ``[y_u <= L_u - 1]`` is always one and is not materialized.
    """

    labels: np.ndarray
    base: np.ndarray
    constant: float

    def to_binary(self, y) -> np.ndarray:
        out = np.zeros(int(self.base[-1]), dtype=np.int64)
        for u, L in enumerate(self.labels):
            for l in range(L - 1):
                out[self.base[u] + l] = 1 if l >= y[u] else 0
        return out

    def from_binary(self, yb) -> np.ndarray:
        y = np.zeros(len(self.labels), dtype=np.int64)
        for u, L in enumerate(self.labels):
            bits = yb[self.base[u]:self.base[u + 1]]
            ones = np.flatnonzero(bits)
            y[u] = int(ones[0]) if len(ones) else L - 1
        return y


def multilabel_to_binary(model: GraphicalModel):
    """Binary model with one indicator per node and non-top label.

    Returns
    -------
    binary : GraphicalModel
    mapping : LabelMapping
        ``energy(binary, mapping.to_binary(y)) + mapping.constant`` equals
        ``energy(model, y)``; non-monotone binary labelings cost at least BIG.
    """
    L = np.asarray(model.labels, dtype=np.int64)
    base = np.zeros(len(L) + 1, dtype=np.int64)
    base[1:] = np.cumsum(L - 1)
    nb = int(base[-1])
    un = [np.zeros(2) for _ in range(nb)]
    edges, mats = [], []
    const = 0.0
    for u, th in enumerate(model.unary):
        Lu = int(L[u])
        if Lu == 1:
            const += th[0]
            continue
        un[base[u]][1] += th[0]
        un[base[u] + Lu - 2][0] += th[Lu - 1]
        for l in range(Lu - 2):
            edges.append((base[u] + l, base[u] + l + 1))
            mats.append(np.array([[0.0, th[l + 1]], [BIG, 0.0]]))
    for (u, v), th in zip(model.edges, model.pairwise):
        Lu, Lv = int(L[u]), int(L[v])
        ext = np.zeros((Lu + 1, Lv + 1))
        ext[:Lu, :Lv] = th
        alpha = ext[:-1, :-1] - ext[1:, :-1] - ext[:-1, 1:] + ext[1:, 1:]
        const += alpha[Lu - 1, Lv - 1]
        for s in range(Lu - 1):
            un[base[u] + s][1] += alpha[s, Lv - 1]
        for t in range(Lv - 1):
            un[base[v] + t][1] += alpha[Lu - 1, t]
        for s in range(Lu - 1):
            for t in range(Lv - 1):
                if alpha[s, t] != 0.0:
                    edges.append((base[u] + s, base[v] + t))
                    mats.append(np.array([[0.0, 0.0], [0.0, alpha[s, t]]]))
    binary = GraphicalModel([2] * nb, edges, un, mats)
    return binary, LabelMapping(L, base, float(const))


def metric_check(theta, tol: float = TOL) -> str:
    """Classify a square cost matrix as "metric", "semimetric" or "neither"."""
    th = np.asarray(theta, dtype=np.float64)
    if th.ndim != 2 or th.shape[0] != th.shape[1]:
        raise InvalidModelError("metric_check needs a square matrix")
    n = th.shape[0]
    off = ~np.eye(n, dtype=bool)
    if (np.abs(np.diag(th)) > tol).any() or (th[off] <= tol).any():
        return "neither"
    if (np.abs(th - th.T) > tol).any():
        return "neither"
    tri = th[:, :, None] + th[None, :, :] - th[:, None, :]
    return "metric" if (tri >= -tol).all() else "semimetric"
