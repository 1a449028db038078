# homogenization/engine/errors.py
"""
Domain exceptions raised by the homogenization engine.

Orchestration code (runners / management commands) maps these onto the
documented process exit codes; the engine itself only raises.
"""
from typing import Optional


class HomogenizationError(RuntimeError):
    """Base class for engine failures."""


class IndefiniteOperatorError(HomogenizationError):
    """
    Conjugate gradient met a direction of non-positive curvature.

    This is the numerical signature of Λ_per ≤ 0 at the working resolution,
    not a programming error.
    """

    def __init__(self, message: str, curvature: float, iteration: int, rayleigh: Optional[float] = None):
        super().__init__(message)
        self.curvature = curvature
        self.iteration = iteration
        self.rayleigh = rayleigh


class ConvergenceError(HomogenizationError):
    """Iterative solve ran out of iterations."""

    def __init__(self, message: str, residual: float, iterations: int):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class EigenConvergenceError(HomogenizationError):
    """Eigensolver did not meet its tolerances within the iteration budget."""

    def __init__(self, message: str, eigenvalue: float, residual: float, iterations: int):
        super().__init__(message)
        self.eigenvalue = eigenvalue
        self.residual = residual
        self.iterations = iterations


class IllPosedLaminateError(HomogenizationError):
    """The 1D laminate cell problem has a degenerate normal (acoustic) block."""

    def __init__(self, message: str, phase: int):
        super().__init__(message)
        self.phase = phase


class InvalidGeometryError(ValueError):
    """Generator parameters describe an unusable microstructure."""


class RasterFormatError(ValueError):
    """PGM raster could not be read or does not describe two phases."""
