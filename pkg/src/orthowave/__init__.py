"""Wavelet-Galerkin pricing of basket options on sparse tensor-product grids."""
from . import basis1d, model, operator, solve, sparsegrid, splinekit

__version__ = "0.1.0"

__all__ = ["splinekit", "basis1d", "sparsegrid", "operator", "solve", "model", "__version__"]
