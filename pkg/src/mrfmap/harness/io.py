"""DGM1 text format for graphical models.

Layout::

    DGM1
    <n> <m>
    <L_0> ... <L_{n-1}>
    one line of L_u costs per node
    per edge: a line "u v" (0-based, u < v) then L_u lines of L_v costs

Lines starting with ``#`` and blank lines are ignored. The token ``inf``
stands for :data:`~mrfmap.model.BIG`.
"""
from __future__ import annotations

import numpy as np

from ..model import BIG, GraphicalModel, InvalidModelError


class ParseError(InvalidModelError):
    """Malformed DGM1 input; ``line`` is 1-based."""

    def __init__(self, line: int, msg: str):
        super().__init__(f"line {line}: {msg}")
        self.line = line


def _lines(text):
    for k, raw in enumerate(text.splitlines(), start=1):
        s = raw.strip()
        if s and not s.startswith("#"):
            yield k, s.split()


def _num(tok, line):
    t = tok.lower()
    if t in ("inf", "+inf"):
        return BIG
    if t == "-inf":
        return -BIG
    try:
        x = float(tok)
    except ValueError:
        raise ParseError(line, f"not a number: {tok!r}") from None
    if x != x:
        raise ParseError(line, "NaN cost")
    return x


def _int(tok, line):
    try:
        return int(tok)
    except ValueError:
        raise ParseError(line, f"not an integer: {tok!r}") from None


def parse_model(text: str) -> GraphicalModel:
    """Read a DGM1 model; errors carry the offending line number."""
    it = _lines(text)

    def nxt(what):
        try:
            return next(it)
        except StopIteration:
            raise ParseError(len(text.splitlines()) + 1, f"unexpected end of file, expected {what}") from None

    k, toks = nxt("header")
    if toks != ["DGM1"]:
        raise ParseError(k, "header must be DGM1")
    k, toks = nxt("node and edge counts")
    if len(toks) != 2:
        raise ParseError(k, "expected '<n> <m>'")
    n, m = _int(toks[0], k), _int(toks[1], k)
    if n < 0 or m < 0:
        raise ParseError(k, "counts must be non-negative")
    labels = []
    if n:
        k, toks = nxt("label counts")
        if len(toks) != n:
            raise ParseError(k, f"expected {n} label counts, got {len(toks)}")
        labels = [_int(t, k) for t in toks]
        if min(labels) < 1:
            raise ParseError(k, "label counts must be positive")
    unary = []
    for u in range(n):
        k, toks = nxt(f"unary costs of node {u}")
        if len(toks) != labels[u]:
            raise ParseError(k, f"node {u} needs {labels[u]} costs, got {len(toks)}")
        unary.append(np.array([_num(t, k) for t in toks]))
    edges, mats = [], []
    for e in range(m):
        k, toks = nxt(f"edge {e}")
        if len(toks) != 2:
            raise ParseError(k, "expected 'u v'")
        u, v = _int(toks[0], k), _int(toks[1], k)
        if not (0 <= u < v < n):
            raise ParseError(k, f"edge ({u}, {v}) needs 0 <= u < v < {n}")
        rows = []
        for _ in range(labels[u]):
            k2, toks = nxt(f"cost row of edge {e}")
            if len(toks) != labels[v]:
                raise ParseError(k2, f"edge ({u}, {v}) rows need {labels[v]} costs")
            rows.append([_num(t, k2) for t in toks])
        edges.append((u, v))
        mats.append(np.array(rows).reshape(labels[u], labels[v]))
    extra = next(it, None)
    if extra is not None:
        raise ParseError(extra[0], "trailing content")
    try:
        return GraphicalModel(labels, edges, unary, mats)
    except InvalidModelError as exc:
        raise ParseError(k, str(exc)) from None


def _fmt(x):
    if x >= BIG:
        return "inf"
    if x <= -BIG:
        return "-inf"
    return repr(float(x))


def write_model(model: GraphicalModel) -> str:
    """DGM1 text; ``float`` repr keeps finite costs bit-exact."""
    out = ["DGM1", f"{model.node_count} {model.edge_count}"]
    if model.node_count:
        out.append(" ".join(str(int(L)) for L in model.labels))
    out += [" ".join(_fmt(x) for x in a) for a in model.unary]
    for (u, v), th in zip(model.edges, model.pairwise):
        out.append(f"{u} {v}")
        out += [" ".join(_fmt(x) for x in row) for row in th]
    return "\n".join(out) + "\n"


def read_model(path) -> GraphicalModel:
    with open(path) as fh:
        return parse_model(fh.read())


def save_model(model: GraphicalModel, path) -> None:
    with open(path, "w") as fh:
        fh.write(write_model(model))
