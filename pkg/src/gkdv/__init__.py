"""Numerical laboratory for solitons of the supercritical generalized KdV equation."""

__version__ = "0.1.0"

from .grid import Grid, GridFunction
from .profiles import SolitonContext, make_context

__all__ = ["Grid", "GridFunction", "SolitonContext", "make_context", "__version__"]
