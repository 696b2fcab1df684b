"""MAP inference for pairwise discrete graphical models."""
from .model import (BIG, TOL, CostVector, GraphicalModel, InvalidModelError,
                    InvalidStructureError, PartialLabeling, RelaxedLabeling, Reparametrization,
                    energy, reparametrize)

__version__ = "0.1.0"

__all__ = [
    "BIG", "TOL", "CostVector", "GraphicalModel", "InvalidModelError", "InvalidStructureError",
    "PartialLabeling", "RelaxedLabeling", "Reparametrization", "energy", "reparametrize",
]
