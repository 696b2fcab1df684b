"""Pure numpy reference implementation of the sweep kernels.

The compiled module ``_kernels`` exposes the same functions with the same
signatures; :mod:`mrfmap.dual_ascent` picks one at import.
"""
import numpy as np


def _views(pk, phi, e, side):
    """Return (own slot, other slot, oriented matrix) of edge ``e`` seen from ``side``."""
    so = pk.slot_off
    mine = phi[so[2 * e + side]:so[2 * e + side + 1]]
    other = phi[so[2 * e + 1 - side]:so[2 * e + 2 - side]]
    Lu, Lv = pk.labels[pk.edge_u[e]], pk.labels[pk.edge_v[e]]
    mat = pk.pair[pk.e_off[e]:pk.e_off[e + 1]].reshape(Lu, Lv)
    return mine, other, (mat if side == 0 else mat.T)


def node_unary(pk, phi, u):
    """theta^phi_u as a fresh array."""
    out = pk.unary[pk.u_off[u]:pk.u_off[u + 1]].copy()
    so = pk.slot_off
    for k in range(pk.inc_ptr[u], pk.inc_ptr[u + 1]):
        e, side = pk.inc_edge[k], pk.inc_side[k]
        out -= phi[so[2 * e + side]:so[2 * e + side + 1]]
    return out


def node_sweep(pk, phi, order, weights):
    """Apply the pull/push node update to every node of ``order`` in turn.

    ``weights[k]`` is the share of the node's unary cost pushed onto the
    incidence ``k`` (CSR position in ``pk.inc_edge``).
    """
    for u in order:
        lo, hi = pk.inc_ptr[u], pk.inc_ptr[u + 1]
        if lo == hi:
            continue
        for k in range(lo, hi):
            mine, other, mat = _views(pk, phi, pk.inc_edge[k], pk.inc_side[k])
            mine[:] = -(mat + other[None, :]).min(axis=1)
        h = node_unary(pk, phi, u)
        for k in range(lo, hi):
            w = weights[k]
            if w != 0.0:
                mine, _, _ = _views(pk, phi, pk.inc_edge[k], pk.inc_side[k])
                mine += w * h


def dual_value(pk, phi):
    """Sum of unary and pairwise minima of theta^phi."""
    n = len(pk.labels)
    total = 0.0
    for u in range(n):
        if pk.u_off[u + 1] > pk.u_off[u]:
            total += node_unary(pk, phi, u).min()
    so = pk.slot_off
    for e in range(len(pk.edge_u)):
        a = phi[so[2 * e]:so[2 * e + 1]]
        b = phi[so[2 * e + 1]:so[2 * e + 2]]
        Lu, Lv = len(a), len(b)
        mat = pk.pair[pk.e_off[e]:pk.e_off[e + 1]].reshape(Lu, Lv)
        total += (mat + a[:, None] + b[None, :]).min()
    return float(total)
