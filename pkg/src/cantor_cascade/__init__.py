"""Singular doubling measures built as multiplicative cascades: the
five-interval model and the Whitney-tree grid around the ternary Cantor set."""

from .chartgrid import Params, ParamsError

__all__ = ["Params", "ParamsError"]
__version__ = "0.1.0"
