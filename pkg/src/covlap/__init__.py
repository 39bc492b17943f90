"""Covariant Poisson equation for compact-Lie-algebra-valued fields on a box grid."""
from . import lie_algebra, grid_fields, norms, solver, inequality_lab
from .lie_algebra import AlgebraSpec, AlgebraElement, build_algebra, su2, su3, u1
from .grid_fields import Grid3, ScalarField, VectorField, TensorField2

__version__ = "0.1.0"
