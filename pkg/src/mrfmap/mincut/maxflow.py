"""s-t graphs and an augmenting-path max-flow solver with search-tree reuse.

The solver grows a source tree and a sink tree, augments along the path
where they meet and repairs both trees by adopting orphaned nodes instead
of rebuilding them (the scheme popular in computer vision flow codes).
"""
from __future__ import annotations

from collections import deque
from typing import NamedTuple

import numpy as np

SOURCE = -1
SINK = -2

_TERMINAL = -1
_ORPHAN = -2
_NONE = -3
_FREE, _S, _T = 0, 1, 2


class NegativeCapacityError(ValueError):
    pass


class STGraph:
    """Directed flow network on ``node_count`` inner nodes plus source and sink.

    Arcs into the source and out of the sink are dropped on insertion since
    they never cross a cut.
    """

    def __init__(self, node_count: int):
        self.node_count = int(node_count)
        self.arcs = []
        self.constant_offset = 0.0

    def add_arc(self, a: int, b: int, cap: float) -> None:
        """Arc ``a -> b``; endpoints are node ids or :data:`SOURCE` / :data:`SINK`."""
        cap = float(cap)
        if cap < 0:
            raise NegativeCapacityError(f"arc ({a}, {b}) has negative capacity {cap}")
        if b == SOURCE or a == SINK or a == b or cap == 0.0:
            return
        for x in (a, b):
            if x not in (SOURCE, SINK) and not (0 <= x < self.node_count):
                raise ValueError(f"node {x} out of range")
        self.arcs.append((a, b, cap))

    def add_constant(self, c: float) -> None:
        self.constant_offset += float(c)

    def cut_value(self, side) -> float:
        """Total capacity of arcs from the source side to the sink side.

        ``side[v]`` is 0 for the source side and 1 for the sink side.
        """
        def bit(x):
            return 0 if x == SOURCE else 1 if x == SINK else side[x]
        return float(sum(c for a, b, c in self.arcs if bit(a) == 0 and bit(b) == 1))

    def to_dimacs(self) -> str:
        """DIMACS max-flow text. Inner nodes are 1..n, source n+1, sink n+2."""
        n = self.node_count
        ids = lambda x: n + 1 if x == SOURCE else n + 2 if x == SINK else x + 1  # noqa: E731
        lines = [f"p max {n + 2} {len(self.arcs)}", f"n {n + 1} s", f"n {n + 2} t"]
        lines += [f"a {ids(a)} {ids(b)} {c!r}" for a, b, c in self.arcs]
        return "\n".join(lines) + "\n"


class CutResult(NamedTuple):
    """Flow value and per-node side (0 source side, 1 sink side)."""

    flow: float
    side: np.ndarray


def max_flow(graph: STGraph, source_side: str = "minimal") -> CutResult:
    """Maximum flow and a minimum cut.

    Parameters
    ----------
    source_side : {"minimal", "maximal"}
        Among all minimum cuts return the one with the smallest source side
        (nodes reachable from the source in the residual network) or the
        largest one (nodes that cannot reach the sink).
    """
    n = graph.node_count
    head, rcap = [], []
    adj = [[] for _ in range(n)]
    tr = [0.0] * n
    flow = 0.0
    for a, b, c in graph.arcs:
        if a == SOURCE and b == SINK:
            flow += c
        elif a != SOURCE and b != SINK:
            k = len(head)
            head += [b, a]
            rcap += [c, 0.0]
            adj[a].append(k)
            adj[b].append(k + 1)
    # flow through s -> v -> t is pushed right away
    src = [0.0] * n
    snk = [0.0] * n
    for a, b, c in graph.arcs:
        if a == SOURCE and b != SINK:
            src[b] += c
        elif b == SINK and a != SOURCE:
            snk[a] += c
    for v in range(n):
        flow += min(src[v], snk[v])
        tr[v] = src[v] - snk[v]

    tree = [_FREE] * n
    parent = [_NONE] * n
    active = deque()
    in_q = [False] * n
    for v in range(n):
        if tr[v] > 0:
            tree[v], parent[v] = _S, _TERMINAL
        elif tr[v] < 0:
            tree[v], parent[v] = _T, _TERMINAL
        if tree[v] != _FREE:
            active.append(v)
            in_q[v] = True

    def rooted(v):
        while True:
            p = parent[v]
            if p == _TERMINAL:
                return True
            if p < 0:
                return False
            v = head[p]

    while True:
        mid = -1
        while active:
            p = active[0]
            if tree[p] == _FREE:
                active.popleft()
                in_q[p] = False
                continue
            for a in adj[p]:
                cap = rcap[a] if tree[p] == _S else rcap[a ^ 1]
                if cap <= 0:
                    continue
                q = head[a]
                if tree[q] == _FREE:
                    tree[q] = tree[p]
                    parent[q] = a ^ 1
                    if not in_q[q]:
                        active.append(q)
                        in_q[q] = True
                elif tree[q] != tree[p]:
                    mid = a if tree[p] == _S else a ^ 1
                    break
            if mid >= 0:
                break
            active.popleft()
            in_q[p] = False
        if mid < 0:
            break

        # bottleneck along source path, middle arc and sink path
        x, y = head[mid ^ 1], head[mid]
        b = rcap[mid]
        v = x
        while parent[v] != _TERMINAL:
            pa = parent[v]
            b = min(b, rcap[pa ^ 1])
            v = head[pa]
        b = min(b, tr[v])
        v = y
        while parent[v] != _TERMINAL:
            pa = parent[v]
            b = min(b, rcap[pa])
            v = head[pa]
        b = min(b, -tr[v])

        rcap[mid] -= b
        rcap[mid ^ 1] += b
        orphans = deque()
        v = x
        while parent[v] != _TERMINAL:
            pa = parent[v]
            rcap[pa ^ 1] -= b
            rcap[pa] += b
            nxt = head[pa]
            if rcap[pa ^ 1] <= 0:
                parent[v] = _ORPHAN
                orphans.append(v)
            v = nxt
        tr[v] -= b
        if tr[v] <= 0:
            parent[v] = _ORPHAN
            orphans.append(v)
        v = y
        while parent[v] != _TERMINAL:
            pa = parent[v]
            rcap[pa] -= b
            rcap[pa ^ 1] += b
            nxt = head[pa]
            if rcap[pa] <= 0:
                parent[v] = _ORPHAN
                orphans.append(v)
            v = nxt
        tr[v] += b
        if tr[v] >= 0:
            parent[v] = _ORPHAN
            orphans.append(v)
        flow += b

        while orphans:
            v = orphans.popleft()
            side = tree[v]
            found = False
            for a in adj[v]:
                q = head[a]
                if tree[q] != side:
                    continue
                cap = rcap[a ^ 1] if side == _S else rcap[a]
                if cap > 0 and rooted(q):
                    parent[v] = a
                    found = True
                    break
            if found:
                continue
            for a in adj[v]:
                q = head[a]
                if tree[q] != side:
                    continue
                cap = rcap[a ^ 1] if side == _S else rcap[a]
                if cap > 0 and not in_q[q]:
                    active.append(q)
                    in_q[q] = True
                pq = parent[q]
                if pq >= 0 and head[pq] == v:
                    parent[q] = _ORPHAN
                    orphans.append(q)
            tree[v] = _FREE
            parent[v] = _NONE

    if source_side == "minimal":
        side = np.array([0 if tree[v] == _S else 1 for v in range(n)], dtype=np.int64)
    elif source_side == "maximal":
        # nodes that can still push flow to the sink form the sink side
        side = np.zeros(n, dtype=np.int64)
        q = deque(v for v in range(n) if tr[v] < 0)
        for v in q:
            side[v] = 1
        while q:
            v = q.popleft()
            for a in adj[v]:
                u = head[a]
                if side[u] == 0 and rcap[a ^ 1] > 0:
                    side[u] = 1
                    q.append(u)
    else:
        raise ValueError(f"unknown source_side {source_side!r}")
    return CutResult(float(flow), side)
