"""Pseudospectral trajectory optimization by orthogonal polynomial integral collocation."""

from dopic.bases import Grid, NodeFamily, PolyFamily, eval_basis, make_grid

__version__ = "0.1.0"

__all__ = ["PolyFamily", "NodeFamily", "Grid", "eval_basis", "make_grid", "__version__"]
