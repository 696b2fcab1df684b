"""Dispatch a named solver and collect a primal/dual trace."""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .. import decomposition as dc
from .. import dual_ascent as da
from .. import mincut, primal
from ..model import GraphicalModel, InvalidModelError, energy
from .bruteforce import brute_force

SOLVERS = ("bruteforce", "icm", "block-icm", "diffusion", "srmp", "trws", "subgrad",
           "subgrad-decomp", "alpha-exp", "ab-swap", "qpbo", "mincut")


@dataclass
class SolverResult:
    """Labeling, its verified energy, the best dual bound and the trace."""

    solver: str
    labeling: np.ndarray
    energy: float
    dual: Optional[float]
    trace: da.SolverTrace
    extra: dict = field(default_factory=dict)


def _order(model, order):
    idx = np.arange(model.node_count)
    if order in (None, "idx"):
        return idx
    if order == "reverse":
        return idx[::-1].copy()
    raise InvalidModelError(f"unknown order {order!r}")


def run_solver(model: GraphicalModel, solver: str, iters: int = 1000, tol: float = 1e-6,
               order: Optional[str] = None, weights: str = "minsum", seed: int = 0,
               polish: Optional[str] = None) -> SolverResult:
    """Run ``solver`` on ``model``.

    ``solver`` may carry a rounding suffix: ``"diffusion+icm"`` or
    ``"trws+icm"`` polishes the rounded labeling with ICM, ``"+naive"``
    keeps the plain rounding. ``trws`` is an alias of ``srmp``.

    The returned energy is recomputed from the labeling; the last trace row
    carries it.
    """
    base, _, suffix = solver.partition("+")
    polish = polish or (suffix or None)
    if base not in SOLVERS:
        raise InvalidModelError(f"unknown solver {solver!r}")
    if polish not in (None, "icm", "naive"):
        raise InvalidModelError(f"unknown rounding {polish!r}")
    if iters < 1:
        raise InvalidModelError("iters must be positive")
    ordv = _order(model, order)
    t0 = time.perf_counter()
    dual_val = None
    extra = {}
    if base == "bruteforce":
        r = brute_force(model)
        y, dual_val = r.labeling, r.energy
        trace = da.SolverTrace()
    elif base == "icm":
        y = primal.icm(model, max_sweeps=iters)
        trace = da.SolverTrace()
    elif base == "block-icm":
        y = primal.block_icm(model, schedule=primal.forest_blocks(model), max_rounds=iters)
        trace = da.SolverTrace()
    elif base == "diffusion":
        phi, trace = da.run_diffusion(model, weights=weights, iters=iters, tol=tol,
                                      order=ordv, primal=True)
        y = trace.meta["best_labeling"]
        dual_val = trace.best_dual()
    elif base in ("srmp", "trws"):
        phi, trace = da.run_srmp(model, iters=iters, tol=tol, order=ordv, primal=True)
        y = trace.meta["best_labeling"]
        dual_val = trace.best_dual()
    elif base == "subgrad":
        phi, trace = dc.run_subgradient(model, target="D", iters=iters, primal=True)
        y = trace.meta["best_labeling"]
        dual_val = trace.best_dual()
    elif base == "subgrad-decomp":
        dec, trace = dc.run_subgradient(model, target="U", iters=iters, primal=True)
        y = trace.meta["best_labeling"]
        dual_val = trace.best_dual()
    elif base == "alpha-exp":
        y, trace = mincut.alpha_expansion(model, max_rounds=iters)
    elif base == "ab-swap":
        y, trace = mincut.alpha_beta_swap(model, max_rounds=iters)
    elif base == "qpbo":
        r = mincut.qpbo(model)
        y, dual_val = r.labeling, r.lower_bound
        extra["persistent"] = r.persistent
        trace = da.SolverTrace()
    else:  # mincut
        if (model.labels == 2).all():
            y = mincut.solve_binary(model).labeling
        else:
            for e, th in enumerate(model.pairwise):
                if not mincut.is_submodular(th):
                    raise mincut.SubmodularityError(f"edge {e} {model.edges[e]} is not submodular")
            bm, mp = mincut.multilabel_to_binary(model)
            y = mp.from_binary(mincut.solve_binary(bm).labeling)
        trace = da.SolverTrace()
    if polish == "icm":
        y = primal.icm(model, y)
    en = energy(model, y)
    last = trace.rows[-1].iter if trace.rows else 0
    trace.append(last + 1, time.perf_counter() - t0, dual_val, en, None)
    trace.meta["solver"] = solver
    return SolverResult(solver, np.asarray(y), en, dual_val, trace, extra)

