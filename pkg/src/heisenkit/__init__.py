"""Numerical calculus on the Heisenberg group H1 and its half-space extension."""
from .grids import Box3, Box4, GeometryError, PolarQuadrature, Quadrature, TensorGrid
from .group import (ExtendedPoint, GroupPoint, dilate, extended_norm, gauge_norm, group_convolve,
                    group_inv, group_mul)

__version__ = "0.1.0"

__all__ = [
    "Box3", "Box4", "GeometryError", "PolarQuadrature", "Quadrature", "TensorGrid",
    "ExtendedPoint", "GroupPoint", "dilate", "extended_norm", "gauge_norm", "group_convolve",
    "group_inv", "group_mul",
]
