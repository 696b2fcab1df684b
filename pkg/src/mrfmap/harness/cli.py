"""Command line interface: solve, eval, gen, convert.

Exit status is 0 on success and 2 on invalid input or options.
"""
from __future__ import annotations

import argparse
import ast
import sys

import numpy as np

from ..model import InvalidModelError, InvalidStructureError, energy
from ..mincut import SubmodularityError, binary_to_cut, multilabel_to_binary
from .bruteforce import OracleRefused
from .generators import KINDS, generate
from .io import read_model, write_model
from .runner import SOLVERS, run_solver


def _params(items):
    out = {}
    for it in items:
        if "=" not in it:
            raise InvalidModelError(f"generator parameter {it!r} must look like key=value")
        k, v = it.split("=", 1)
        try:
            out[k.replace("-", "_")] = ast.literal_eval(v)
        except (ValueError, SyntaxError):
            out[k.replace("-", "_")] = v
    return out


def _read_labeling(path):
    with open(path) as fh:
        toks = fh.read().replace(",", " ").split()
    try:
        return np.array([int(t) for t in toks], dtype=np.int64)
    except ValueError:
        raise InvalidModelError("labeling file must hold integers") from None


def _parser():
    p = argparse.ArgumentParser(prog="mrfmap", description="MAP inference for pairwise models.")
    sub = p.add_subparsers(dest="cmd", required=True)

    s = sub.add_parser("solve", help="run a solver on a DGM1 model")
    s.add_argument("model")
    s.add_argument("--solver", required=True,
                   help="one of %s, optionally with +icm or +naive" % ", ".join(SOLVERS))
    s.add_argument("--iters", type=int, default=1000)
    s.add_argument("--tol", type=float, default=1e-6)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--order", choices=["idx", "reverse"], default="idx")
    s.add_argument("--weights", choices=["minsum", "cmp", "chains"], default="minsum")
    s.add_argument("--trace")

    e = sub.add_parser("eval", help="energy of a labeling")
    e.add_argument("model")
    e.add_argument("labeling")

    g = sub.add_parser("gen", help="write a generated model")
    g.add_argument("kind", choices=sorted(KINDS))
    g.add_argument("params", nargs="*", help="key=value generator parameters")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("-o", "--output", required=True)

    c = sub.add_parser("convert", help="binary encoding or DIMACS max-flow export")
    c.add_argument("model")
    c.add_argument("--to", choices=["binary", "dimacs"], required=True)
    c.add_argument("-o", "--output")
    return p


def _emit(text, path):
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.cmd == "solve":
            model = read_model(args.model)
            r = run_solver(model, args.solver, iters=args.iters, tol=args.tol,
                           order=args.order, weights=args.weights, seed=args.seed)
            if args.trace:
                r.trace.write_csv(args.trace)
            print("energy", repr(r.energy))
            if r.dual is not None:
                print("dual", repr(r.dual))
            print("labeling", " ".join(str(int(x)) for x in r.labeling))
        elif args.cmd == "eval":
            model = read_model(args.model)
            print(repr(energy(model, _read_labeling(args.labeling))))
        elif args.cmd == "gen":
            model = generate(args.kind, seed=args.seed, **_params(args.params))
            _emit(write_model(model), args.output)
        else:
            model = read_model(args.model)
            if args.to == "binary":
                bm, mp = multilabel_to_binary(model)
                text = f"# constant {mp.constant!r}\n" + write_model(bm)
            else:
                text = binary_to_cut(model).to_dimacs()
            _emit(text, args.output)
    except (InvalidModelError, InvalidStructureError, SubmodularityError, OracleRefused,
            OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
