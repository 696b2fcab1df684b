# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled sweep kernels. Mirrors ``_kernels_py`` function for function."""
import numpy as np
cimport numpy as cnp
from libc.stdlib cimport malloc, free

cnp.import_array()

ctypedef cnp.int64_t idx_t


cdef inline void _pull(const double[::1] pair, const idx_t[::1] e_off,
                       const idx_t[::1] slot_off, const idx_t[::1] labels,
                       const idx_t[::1] edge_u, const idx_t[::1] edge_v,
                       double[::1] phi, idx_t e, idx_t side) noexcept nogil:
    cdef idx_t Lu = labels[edge_u[e]]
    cdef idx_t Lv = labels[edge_v[e]]
    cdef idx_t base = e_off[e]
    cdef idx_t mine = slot_off[2 * e + side]
    cdef idx_t other = slot_off[2 * e + 1 - side]
    cdef idx_t s, l
    cdef double best, c
    if side == 0:
        for s in range(Lu):
            best = pair[base + s * Lv] + phi[other]
            for l in range(1, Lv):
                c = pair[base + s * Lv + l] + phi[other + l]
                if c < best:
                    best = c
            phi[mine + s] = -best
    else:
        for s in range(Lv):
            best = pair[base + s] + phi[other]
            for l in range(1, Lu):
                c = pair[base + l * Lv + s] + phi[other + l]
                if c < best:
                    best = c
            phi[mine + s] = -best


def node_sweep(pk, double[::1] phi, order, weights):
    cdef const double[::1] pair = pk.pair
    cdef const double[::1] unary = pk.unary
    cdef const idx_t[::1] e_off = pk.e_off
    cdef const idx_t[::1] u_off = pk.u_off
    cdef const idx_t[::1] slot_off = pk.slot_off
    cdef const idx_t[::1] labels = pk.labels
    cdef const idx_t[::1] edge_u = pk.edge_u
    cdef const idx_t[::1] edge_v = pk.edge_v
    cdef const idx_t[::1] inc_ptr = pk.inc_ptr
    cdef const idx_t[::1] inc_edge = pk.inc_edge
    cdef const idx_t[::1] inc_side = pk.inc_side
    cdef const idx_t[::1] ord_ = np.ascontiguousarray(order, dtype=np.int64)
    cdef const double[::1] w = np.ascontiguousarray(weights, dtype=np.float64)
    cdef idx_t i, u, k, s, e, side, Lu, off
    cdef idx_t maxL = max(1, int(np.max(pk.labels))) if len(pk.labels) else 1
    cdef double *h = <double *> malloc(maxL * sizeof(double))
    if h == NULL:
        raise MemoryError()
    try:
        with nogil:
            for i in range(ord_.shape[0]):
                u = ord_[i]
                if inc_ptr[u] == inc_ptr[u + 1]:
                    continue
                Lu = labels[u]
                for k in range(inc_ptr[u], inc_ptr[u + 1]):
                    _pull(pair, e_off, slot_off, labels, edge_u, edge_v, phi,
                          inc_edge[k], inc_side[k])
                for s in range(Lu):
                    h[s] = unary[u_off[u] + s]
                for k in range(inc_ptr[u], inc_ptr[u + 1]):
                    off = slot_off[2 * inc_edge[k] + inc_side[k]]
                    for s in range(Lu):
                        h[s] -= phi[off + s]
                for k in range(inc_ptr[u], inc_ptr[u + 1]):
                    if w[k] != 0.0:
                        off = slot_off[2 * inc_edge[k] + inc_side[k]]
                        for s in range(Lu):
                            phi[off + s] += w[k] * h[s]
    finally:
        free(h)


def dual_value(pk, double[::1] phi):
    cdef const double[::1] pair = pk.pair
    cdef const double[::1] unary = pk.unary
    cdef const idx_t[::1] e_off = pk.e_off
    cdef const idx_t[::1] u_off = pk.u_off
    cdef const idx_t[::1] slot_off = pk.slot_off
    cdef const idx_t[::1] labels = pk.labels
    cdef const idx_t[::1] edge_u = pk.edge_u
    cdef const idx_t[::1] edge_v = pk.edge_v
    cdef const idx_t[::1] inc_ptr = pk.inc_ptr
    cdef const idx_t[::1] inc_edge = pk.inc_edge
    cdef const idx_t[::1] inc_side = pk.inc_side
    cdef idx_t n = labels.shape[0]
    cdef idx_t m = edge_u.shape[0]
    cdef idx_t u, e, s, t, k, off, a, b, Lu, Lv, base
    cdef double total = 0.0, best, c
    with nogil:
        for u in range(n):
            Lu = labels[u]
            best = 0.0
            for s in range(Lu):
                c = unary[u_off[u] + s]
                for k in range(inc_ptr[u], inc_ptr[u + 1]):
                    off = slot_off[2 * inc_edge[k] + inc_side[k]]
                    c -= phi[off + s]
                if s == 0 or c < best:
                    best = c
            total += best
        for e in range(m):
            Lu = labels[edge_u[e]]
            Lv = labels[edge_v[e]]
            a = slot_off[2 * e]
            b = slot_off[2 * e + 1]
            base = e_off[e]
            best = pair[base] + phi[a] + phi[b]
            for s in range(Lu):
                for t in range(Lv):
                    c = pair[base + s * Lv + t] + phi[a + s] + phi[b + t]
                    if c < best:
                        best = c
            total += best
    return total
