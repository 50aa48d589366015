"""Adversarial N-1 robustness harness for line-switching grid controllers."""

from ._backend import available as available_backends
from ._backend import set_backend
from .grid import FlowSolution, Grid, Line, bundled_grid, check_overflow, load_grid, solve_dc

__version__ = "0.1.0"


def backend() -> str:
    from . import _backend

    return _backend.name


__all__ = [
    "FlowSolution", "Grid", "Line", "available_backends", "backend", "bundled_grid",
    "check_overflow", "load_grid", "set_backend", "solve_dc",
]
