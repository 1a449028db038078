# homogenization/engine/__init__.py
"""
Numerical engine: 2D periodic homogenization of two-phase isotropic media.

Framework-free; solver defaults are read from Django settings when present.
"""
from .errors import (
    ConvergenceError,
    EigenConvergenceError,
    HomogenizationError,
    IllPosedLaminateError,
    IndefiniteOperatorError,
    InvalidGeometryError,
    RasterFormatError,
)
from .tensor2d import IsotropicModuli, Tensor4, isotropic, rank_one_min
from .microgeom import Microstructure, check_admissibility, from_descriptor

__all__ = [
    'ConvergenceError',
    'EigenConvergenceError',
    'HomogenizationError',
    'IllPosedLaminateError',
    'IndefiniteOperatorError',
    'InvalidGeometryError',
    'RasterFormatError',
    'IsotropicModuli',
    'Tensor4',
    'isotropic',
    'rank_one_min',
    'Microstructure',
    'check_admissibility',
    'from_descriptor',
]
