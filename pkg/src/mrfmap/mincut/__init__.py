"""Min-cut solver, energy reductions, roof duality and move-making."""
from .maxflow import SINK, SOURCE, CutResult, NegativeCapacityError, STGraph, max_flow
from .moves import NonSubmodularMoveError, alpha_beta_swap, alpha_expansion
from .qpbo import QpboResult, fusion_move, qpbo, restrict
from .reductions import (BinarySolution, DiagonalForm, LabelMapping, SubmodularityError,
                         binary_to_cut, is_submodular, metric_check, multilabel_to_binary,
                         solve_binary, to_diagonal_form)

__all__ = [
    "SINK", "SOURCE", "CutResult", "NegativeCapacityError", "STGraph", "max_flow",
    "NonSubmodularMoveError", "alpha_beta_swap", "alpha_expansion",
    "QpboResult", "fusion_move", "qpbo", "restrict",
    "BinarySolution", "DiagonalForm", "LabelMapping", "SubmodularityError", "binary_to_cut",
    "is_submodular", "metric_check", "multilabel_to_binary", "solve_binary", "to_diagonal_form",
]
