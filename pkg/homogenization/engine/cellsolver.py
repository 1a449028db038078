# homogenization/engine/cellsolver.py
"""
Periodic cell problem and homogenized tensor.

    M·L*M = min { ∫ (M+∇v)·L(x)(M+∇v) dx ; v periodic }

solved on the Fourier–Galerkin space of `spectral.SpectralCell` by
matrix-free conjugate gradient, preconditioned with the exactly inverted
operator of an isotropic reference medium. CG only needs the discrete form
to be positive definite globally; the energy density itself may be
indefinite (phase 2 with K2 < 0). A direction of non-positive curvature is
reported as an outcome: it is the numerical signature of Λ_per ≤ 0.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from joblib import Parallel, delayed

from .config import get_config
from .errors import ConvergenceError, IndefiniteOperatorError
from .microgeom import Microstructure, refine
from .spectral import CGResult, SpectralCell, conjugate_gradient, hermitian_part
from .tensor2d import IsotropicModuli, SQRT2, Tensor4, isotropic, mandel_basis

logger = logging.getLogger(__name__)

LOADING_NAMES = ('E11', 'E22', 'E12')


@dataclass(frozen=True)
class SolverOptions:
    """CG options; None fields resolve to the configured defaults."""

    tol: Optional[float] = None
    max_iter: Optional[int] = None
    reference: Optional[IsotropicModuli] = None
    workers: Optional[int] = None

    def resolved(self, n: int) -> 'SolverOptions':
        config = get_config()
        tol = self.tol if self.tol is not None else config['cg_tol']
        if tol <= 0:
            raise ValueError(f"tol must be positive, got {tol}")
        return SolverOptions(
            tol=tol,
            max_iter=self.max_iter or config['cg_max_iter_factor'] * n,
            reference=self.reference,
            workers=self.workers or config['workers'],
        )


@dataclass(frozen=True, eq=False)
class CorrectorField:
    """Periodic, zero-mean, real 2-vector field held by its Fourier coefficients."""

    n: int
    vhat: np.ndarray

    def __post_init__(self):
        vhat = hermitian_part(np.asarray(self.vhat, dtype=complex))
        vhat[:, 0, 0] = 0.0
        vhat.setflags(write=False)
        object.__setattr__(self, 'vhat', vhat)

    @classmethod
    def zero(cls, n: int) -> 'CorrectorField':
        return cls(n, np.zeros((2, n, n), dtype=complex))

    def real_space(self) -> np.ndarray:
        """Field values at the cell centres, shape (2, n, n)."""
        return (np.fft.ifft2(self.vhat, axes=(-2, -1)) * self.n ** 2).real

    def gradient(self) -> np.ndarray:
        """Spectral gradient on the n grid, [i, j] = ∂_j v_i."""
        q = np.rint(np.fft.fftfreq(self.n, d=1.0 / self.n))
        kappa = np.stack(np.meshgrid(q, q, indexing='ij'))
        grad_hat = 2j * math.pi * self.vhat[:, None] * kappa[None, :]
        return (np.fft.ifft2(grad_hat, axes=(-2, -1)) * self.n ** 2).real

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.vhat))


@dataclass(frozen=True, eq=False)
class CellSolution:
    correctors: Tuple[CorrectorField, CorrectorField, CorrectorField]
    lstar: Tensor4
    theta: float
    resolution: int
    diagnostics: Dict[str, Any] = field(default_factory=dict)

    @property
    def indefiniteness_detected(self) -> bool:
        return bool(self.diagnostics.get('indefiniteness_detected', False))

    def to_json(self) -> Dict[str, Any]:
        return {
            'lstar': self.lstar.to_json(),
            'theta': self.theta,
            'resolution': self.resolution,
            'diagnostics': dict(self.diagnostics),
        }


def _solve(cell: SpectralCell, M: np.ndarray, opts: SolverOptions) -> CGResult:
    rhs = -cell.load(M)
    return conjugate_gradient(
        cell.apply,
        rhs,
        cell.precondition,
        tol=opts.tol,
        max_iter=opts.max_iter,
    )


def solve_corrector(m: Microstructure, M: np.ndarray, opts: Optional[SolverOptions] = None) -> CorrectorField:
    """
    Corrector v_M minimising ∫(M+∇v)·L(M+∇v) over the Fourier–Galerkin space.

    Raises:
        IndefiniteOperatorError: CG met non-positive curvature.
        ConvergenceError: relative residual above tol after max_iter.
    """
    opts = (opts or SolverOptions()).resolved(m.n)
    M = np.asarray(M, dtype=float)
    if np.abs(M - M.T).max() > 1e-14 * max(np.abs(M).max(), 1.0):
        raise ValueError("loading M must be symmetric")

    cell = SpectralCell(m, reference=opts.reference)
    result = _solve(cell, M, opts)
    if result.indefinite:
        rayleigh = cell.rayleigh_quotient(result.direction)
        raise IndefiniteOperatorError(
            f"non-positive curvature {result.curvature:.3e} at CG iteration {result.iterations} "
            f"(Rayleigh quotient {rayleigh:.3e})",
            curvature=result.curvature,
            iteration=result.iterations,
            rayleigh=rayleigh,
        )
    if not result.converged:
        raise ConvergenceError(
            f"CG did not reach tol={opts.tol:.1e} in {opts.max_iter} iterations "
            f"(residual {result.residual:.3e})",
            residual=result.residual,
            iterations=result.iterations,
        )
    return CorrectorField(m.n, result.x)


def homogenize(m: Microstructure, opts: Optional[SolverOptions] = None) -> CellSolution:
    """
    Homogenized tensor from the three Mandel-basis correctors.

    (B_p)·L*(B_q) = ∫(B_p+∇v_p)·L(B_q+∇v_q) is evaluated exactly on the
    oversampled grid; the Gram matrix is symmetrised and the asymmetry
    before symmetrisation is reported.
    """
    opts = (opts or SolverOptions()).resolved(m.n)
    cell = SpectralCell(m, reference=opts.reference)
    basis = mandel_basis()

    logger.info(
        f"🔄 Homogenizing n={m.n}, θ={m.volume_fraction:.4f} "
        f"(tol={opts.tol:.1e}, max_iter={opts.max_iter}, workers={opts.workers})"
    )
    results: List[CGResult] = Parallel(n_jobs=opts.workers, prefer='threads')(
        delayed(_solve)(cell, B, opts) for B in basis
    )

    indefinite = any(r.indefinite for r in results)
    for name, r in zip(LOADING_NAMES, results):
        if r.indefinite:
            logger.warning(
                f"⚠️ Loading {name}: non-positive curvature {r.curvature:.3e} "
                f"at iteration {r.iterations}; discrete form not positive definite"
            )
        elif not r.converged:
            raise ConvergenceError(
                f"corrector {name} did not converge in {r.iterations} iterations "
                f"(residual {r.residual:.3e})",
                residual=r.residual,
                iterations=r.iterations,
            )

    fields = [r.x for r in results]
    gram = np.empty((3, 3))
    for p in range(3):
        for q in range(3):
            gram[p, q] = cell.bilinear(fields[q], basis[q], fields[p], basis[p])
    scale = max(np.abs(gram).max(), np.finfo(float).tiny)
    asymmetry = float(np.abs(gram - gram.T).max() / scale)
    lstar = Tensor4(0.5 * (gram + gram.T))

    correctors = (
        CorrectorField(m.n, fields[0]),
        CorrectorField(m.n, fields[1]),
        CorrectorField(m.n, fields[2] / SQRT2),
    )
    diagnostics = {
        'cg_iterations': {name: r.iterations for name, r in zip(LOADING_NAMES, results)},
        'final_relative_residual': {name: r.residual for name, r in zip(LOADING_NAMES, results)},
        'indefiniteness_detected': indefinite,
        'rayleigh_upper_bound': min(
            (cell.rayleigh_quotient(r.direction) for r in results if r.indefinite), default=None,
        ),
        'asymmetry_before_symmetrization': asymmetry,
        'reference_moduli': cell.reference.to_json(),
        'tol': opts.tol,
        'max_iter': opts.max_iter,
    }
    logger.info(f"✅ Homogenized tensor assembled (asymmetry {asymmetry:.2e}, indefinite={indefinite})")
    return CellSolution(
        correctors=correctors,
        lstar=lstar,
        theta=m.volume_fraction,
        resolution=m.n,
        diagnostics=diagnostics,
    )


@dataclass(frozen=True, eq=False)
class Extrapolation:
    """Richardson estimate of L* from the Galerkin tensors at two nested resolutions."""

    lstar: Tensor4
    coarse: CellSolution
    fine: CellSolution

    @property
    def correction(self) -> float:
        return float(np.linalg.norm(self.lstar.mandel - self.fine.lstar.mandel))

    def to_json(self) -> Dict[str, Any]:
        return {
            'lstar': self.lstar.to_json(),
            'resolutions': [self.coarse.resolution, self.fine.resolution],
            'correction_norm': self.correction,
        }


def extrapolate(
    m: Microstructure,
    opts: Optional[SolverOptions] = None,
    factor: int = 2,
    coarse: Optional[CellSolution] = None,
) -> Extrapolation:
    """
    First-order Richardson extrapolation (f·L*_fn − L*_n) / (f − 1).

    Galerkin tensors decrease to L* with leading error C/n (pixel laminates
    show it cleanly); the combination cancels that term. The result is an
    estimate, not an upper bound. `coarse` reuses a solution already
    computed at m.n.
    """
    if factor < 2:
        raise ValueError(f"refinement factor must be at least 2, got {factor}")
    if coarse is None:
        coarse = homogenize(m, opts)
    elif coarse.resolution != m.n:
        raise ValueError(f"coarse solution is at n={coarse.resolution}, microstructure at n={m.n}")
    fine = homogenize(refine(m, factor), opts)
    lstar = Tensor4((factor * fine.lstar.mandel - coarse.lstar.mandel) / (factor - 1))
    logger.info(f"📊 Extrapolated L* from n={coarse.resolution} and n={fine.resolution}")
    return Extrapolation(lstar=lstar, coarse=coarse, fine=fine)


def energy_of(m: Microstructure, M: np.ndarray, v: CorrectorField) -> float:
    """∫(M+∇v)·L(x)(M+∇v) dx, exact for the band-limited field v."""
    if v.n != m.n:
        raise ValueError(f"corrector resolution {v.n} does not match microstructure {m.n}")
    return SpectralCell(m).energy(np.asarray(v.vhat), M)


def voigt_bound(m: Microstructure) -> Tensor4:
    """Arithmetic mean ⟨L⟩ = θL¹ + (1−θ)L²."""
    theta = m.volume_fraction
    L1, L2 = m.phase_tensors()
    return Tensor4(theta * L1.mandel + (1.0 - theta) * L2.mandel)


def reuss_bound(m: Microstructure) -> Tensor4:
    """
    Harmonic mean ⟨L⁻¹⟩⁻¹; defined only when every present phase is very
    strongly elliptic.
    """
    theta = m.volume_fraction
    compliance = np.zeros((3, 3))
    for weight, phase in ((theta, m.phase1), (1.0 - theta, m.phase2)):
        if weight == 0.0:
            continue
        if not phase.very_strongly_elliptic:
            raise ValueError(
                f"Reuss bound needs very strongly elliptic phases; "
                f"(λ, μ) = ({phase.lam}, {phase.mu}) is not"
            )
        compliance += weight * np.linalg.inv(isotropic(phase).mandel)
    return Tensor4(np.linalg.inv(compliance))
