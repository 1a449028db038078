# homogenization/engine/coercivity.py
"""
Coercivity of the elastic energy.

Λ_per is the smallest Rayleigh quotient ∫∇v·L∇v / ∫|∇v|² over periodic,
mean-zero fields; the Bloch quotients Λ_k replace ∇ by ∇ + 2πi k⊗ and their
minimum over a k-grid is an upper estimate of the whole-space Λ. A lower
bound mechanism is the comparison certificate: if L − L̲ is pointwise PSD for
a strongly elliptic isotropic L̲ then Λ ≥ 0.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed
from scipy.linalg import eigh
from scipy.sparse.linalg import LinearOperator, lobpcg

from .config import get_config
from .errors import EigenConvergenceError
from .microgeom import Microstructure, refine, rotate90
from .spectral import SpectralCell, conjugate_gradient
from .tensor2d import (
    EllipticityReport,
    IsotropicModuli,
    Tensor4,
    is_psd,
    isotropic,
    project_isotropic,
    rank_one_min,
)

logger = logging.getLogger(__name__)

MAX_SHIFTS = 25
SHIFT_FRACTION = 0.05
CURVATURE_FLOOR = 1e-10
INNER_TOL_FACTOR = 0.1
INNER_TOL_CEILING = 1e-2


@dataclass
class EigenResult:
    value: float
    vector: np.ndarray
    iterations: int
    residual: float
    shift: float
    method: str
    quasi_momentum: Tuple[float, float] = (0.0, 0.0)
    inner_iterations: int = 0

    def to_json(self) -> Dict[str, Any]:
        return {
            'value': self.value,
            'iterations': self.iterations,
            'residual': self.residual,
            'final_shift': self.shift,
            'method': self.method,
            'inner_iterations': self.inner_iterations,
        }


@dataclass(frozen=True)
class ComparisonCertificate:
    comparison_psd: bool
    underline_moduli: IsotropicModuli
    underline_rank_one_min: float
    gaps: Dict[str, Dict[str, float]] = field(default_factory=dict)

    def to_json(self) -> Dict[str, Any]:
        return {
            'comparison_psd': self.comparison_psd,
            'underline_moduli': self.underline_moduli.to_json(),
            'underline_rank_one_min': self.underline_rank_one_min,
            'gaps': self.gaps,
        }


@dataclass
class CoercivityReport:
    lambda_per: float
    resolution: int
    certificate: ComparisonCertificate
    bloch_samples: List[Tuple[Tuple[float, float], float]] = field(default_factory=list)
    diagnostics: Dict[str, Any] = field(default_factory=dict)

    @property
    def lambda_bloch_min(self) -> Optional[float]:
        if not self.bloch_samples:
            return None
        return min(value for _, value in self.bloch_samples)

    def csv_rows(self) -> List[List[float]]:
        return [[k[0], k[1], value] for k, value in self.bloch_samples]

    def to_json(self) -> Dict[str, Any]:
        return {
            'lambda_per': self.lambda_per,
            'resolution': self.resolution,
            'bloch_samples': [{'k': list(k), 'lambda': value} for k, value in self.bloch_samples],
            'lambda_bloch_min': self.lambda_bloch_min,
            'lambda_bloch_min_is_upper_bound': True,
            'certificate': self.certificate.to_json(),
            'diagnostics': self.diagnostics,
        }


@dataclass(frozen=True)
class HomogenizedBoundsReport:
    """Lower bounds on the homogenized tensor from the comparison argument."""

    projection: IsotropicModuli
    projection_residual: float
    bulk_margin: float
    shear_margin: float
    comparison_psd: bool
    volume_average_bound: float
    isotropic_conclusion: bool

    def to_json(self) -> Dict[str, Any]:
        return {
            'projection': self.projection.to_json(),
            'projection_residual': self.projection_residual,
            'bulk_margin': self.bulk_margin,
            'shear_margin': self.shear_margin,
            'comparison_psd': self.comparison_psd,
            'volume_average_bound': self.volume_average_bound,
            'isotropic_conclusion': self.isotropic_conclusion,
        }


# ---------------------------------------------------------------------------
# Generalized eigenproblem A v = Λ B v
# ---------------------------------------------------------------------------

def _energy_scale(m: Microstructure) -> float:
    return max(max(abs(p.mu), abs(p.p_wave)) for p in (m.phase1, m.phase2)) or 1.0


def _b_inner(cell: SpectralCell, x: np.ndarray, y: np.ndarray) -> complex:
    return complex(np.vdot(x, cell.apply_gram(y)))


def _b_orthonormalize(cell: SpectralCell, block: List[np.ndarray]) -> List[np.ndarray]:
    gram = np.array([[_b_inner(cell, x, y) for y in block] for x in block])
    gram = 0.5 * (gram + gram.conj().T)
    w, U = eigh(gram)
    keep = w > 1e-14 * w.max()
    if not keep.any():
        raise EigenConvergenceError("eigen block collapsed to zero", eigenvalue=math.nan, residual=math.nan, iterations=0)
    U = U[:, keep] / np.sqrt(w[keep])
    return [sum(U[j, c] * block[j] for j in range(len(block))) for c in range(U.shape[1])]


def _rayleigh_ritz(cell: SpectralCell, block: List[np.ndarray]) -> Tuple[np.ndarray, List[np.ndarray]]:
    basis = _b_orthonormalize(cell, block)
    applied = [cell.apply(x) for x in basis]
    ahat = np.array([[complex(np.vdot(x, ay)) for ay in applied] for x in basis])
    ahat = 0.5 * (ahat + ahat.conj().T)
    theta, C = eigh(ahat)
    ritz = [sum(C[j, c] * basis[j] for j in range(len(basis))) for c in range(len(basis))]
    return theta, ritz


def _eigen_residual(cell: SpectralCell, value: float, x: np.ndarray) -> float:
    r = cell.apply(x) - value * cell.apply_gram(x)
    return math.sqrt(max(float(np.vdot(r, cell.solve_gram(r)).real), 0.0))


def inner_tolerance(residual: float, scale: float, floor: float) -> float:
    """Relative CG tolerance for one outer step: a tenth of the relative eigen-residual, clamped."""
    if not math.isfinite(residual):
        return INNER_TOL_CEILING
    return min(INNER_TOL_CEILING, max(floor, INNER_TOL_FACTOR * residual / scale))


def _inverse_iteration(
    cell: SpectralCell,
    eig_tol: float,
    max_iter: int,
    block_size: int,
    cg_tol: float,
    cg_max_iter: int,
    scale: float,
) -> EigenResult:
    """
    Block inverse iteration on (A − σB)⁻¹B with Rayleigh–Ritz.

    σ starts at 0. When an inner CG solve meets a direction p of
    non-positive curvature, the Rayleigh quotient of p is an upper bound for
    the smallest eigenvalue; σ is moved below it and the sweep restarts.

    Inner solves are inexact: their tolerance follows the current
    eigen-residual down to cg_tol, and each starts from x / (θ − σ), the
    exact solution for a Ritz pair (θ, x) that is already an eigenpair.
    """
    dof = int(cell.mask.sum()) * 2
    if dof == 0:
        raise ValueError(f"resolution {cell.n} leaves no Fourier–Galerkin modes")
    block_size = max(1, min(block_size, dof))
    rng = np.random.default_rng(0)
    block = _b_orthonormalize(cell, [cell.random(rng) for _ in range(block_size)])
    ritz_values: Optional[np.ndarray] = None

    sigma = 0.0
    step = SHIFT_FRACTION * scale
    shifts = 0
    inner_iterations = 0
    previous = math.inf
    value, residual = math.inf, math.inf

    def shifted(w):
        return cell.apply(w) - sigma * cell.apply_gram(w)

    def shifted_precondition(r):
        return cell.precondition(r, shift=sigma)

    iteration = 0
    while iteration < max_iter:
        iteration += 1
        tol = inner_tolerance(residual, scale, cg_tol)
        solved = []
        restart = False
        for j, x in enumerate(block):
            x0 = None
            if ritz_values is not None and ritz_values[j] - sigma > 0:
                x0 = x / (ritz_values[j] - sigma)
            result = conjugate_gradient(
                shifted, cell.apply_gram(x), shifted_precondition, tol, cg_max_iter, x0=x0,
                gram=cell.apply_gram, curvature_floor=CURVATURE_FLOOR * scale,
            )
            inner_iterations += result.iterations
            if result.indefinite:
                p = result.direction
                rayleigh = cell.rayleigh_quotient(p)
                sigma = min(sigma, rayleigh) - step
                shifts += 1
                logger.debug(f"eig: indefinite inner solve, R(p)={rayleigh:.3e}, shift → {sigma:.3e}")
                if shifts > MAX_SHIFTS:
                    raise EigenConvergenceError(
                        f"shift fallback exhausted after {shifts} restarts (σ={sigma:.3e})",
                        eigenvalue=rayleigh,
                        residual=math.inf,
                        iterations=iteration,
                    )
                restart = True
                break
            solved.append(result.x)
        if restart:
            previous = math.inf
            continue

        theta, ritz = _rayleigh_ritz(cell, solved)
        value = float(theta[0])
        residual = _eigen_residual(cell, value, ritz[0])
        logger.debug(f"eig: it={iteration} Λ={value:.12e} res={residual:.3e} σ={sigma:.3e} inner tol={tol:.1e}")
        if abs(value - previous) <= eig_tol and residual <= eig_tol:
            return EigenResult(
                value=value,
                vector=ritz[0],
                iterations=iteration,
                residual=residual,
                shift=sigma,
                method='inverse-iteration',
                quasi_momentum=cell.quasi_momentum,
                inner_iterations=inner_iterations,
            )
        previous = value
        block = ritz
        ritz_values = theta

    raise EigenConvergenceError(
        f"eigensolver did not converge in {max_iter} iterations (Λ={value:.6e}, residual {residual:.3e})",
        eigenvalue=value,
        residual=residual,
        iterations=max_iter,
    )


def _lobpcg(cell: SpectralCell, eig_tol: float, max_iter: int, block_size: int) -> EigenResult:
    mask = np.broadcast_to(cell.mask, (2, cell.n, cell.n))
    index = np.flatnonzero(mask)
    size = index.size
    if size == 0:
        raise ValueError(f"resolution {cell.n} leaves no Fourier–Galerkin modes")

    def unpack(v):
        w = cell.zeros().ravel()
        w[index] = v
        return w.reshape(2, cell.n, cell.n)

    def pack(w):
        return w.ravel()[index]

    def as_operator(fn):
        def matvec(v):
            v = np.asarray(v).reshape(size, -1)
            return np.column_stack([pack(fn(unpack(v[:, c]))) for c in range(v.shape[1])])
        return LinearOperator((size, size), matvec=matvec, matmat=matvec, dtype=complex)

    rng = np.random.default_rng(0)
    X = np.column_stack([pack(cell.random(rng)) for _ in range(max(1, min(block_size, size)))])
    values, vectors = lobpcg(
        as_operator(cell.apply),
        X,
        B=as_operator(cell.apply_gram),
        M=as_operator(cell.precondition),
        tol=eig_tol,
        maxiter=max_iter,
        largest=False,
    )
    order = np.argsort(values)
    value = float(values[order[0]])
    vector = unpack(vectors[:, order[0]])
    vector = vector / math.sqrt(max(_b_inner(cell, vector, vector).real, np.finfo(float).tiny))
    residual = _eigen_residual(cell, value, vector)
    if residual > max(eig_tol, 1e3 * eig_tol * abs(value)):
        raise EigenConvergenceError(
            f"LOBPCG residual {residual:.3e} above tolerance after {max_iter} iterations",
            eigenvalue=value,
            residual=residual,
            iterations=max_iter,
        )
    return EigenResult(
        value=value,
        vector=vector,
        iterations=max_iter,
        residual=residual,
        shift=0.0,
        method='lobpcg',
        quasi_momentum=cell.quasi_momentum,
    )


def smallest_eigenpair(
    m: Microstructure,
    quasi_momentum: Tuple[float, float] = (0.0, 0.0),
    eig_tol: Optional[float] = None,
    max_iter: Optional[int] = None,
    block_size: Optional[int] = None,
    method: str = 'inverse-iteration',
) -> EigenResult:
    """
    Smallest eigenpair of A v = Λ B v for one quasi-momentum.

    Raises:
        EigenConvergenceError: iteration budget or shift fallback exhausted.
    """
    config = get_config()
    eig_tol = eig_tol or config['eig_tol']
    max_iter = max_iter or config['eig_max_iter']
    block_size = block_size or config['eig_block']
    if eig_tol <= 0:
        raise ValueError(f"eig_tol must be positive, got {eig_tol}")

    cell = SpectralCell(m, quasi_momentum=quasi_momentum)
    if method == 'lobpcg':
        return _lobpcg(cell, eig_tol, max_iter, block_size)
    if method != 'inverse-iteration':
        raise ValueError(f"unknown eigen method {method!r}")
    return _inverse_iteration(
        cell,
        eig_tol=eig_tol,
        max_iter=max_iter,
        block_size=block_size,
        cg_tol=min(config['cg_tol'], 0.1 * eig_tol),
        cg_max_iter=config['cg_max_iter_factor'] * m.n,
        scale=_energy_scale(m),
    )


def _at_resolution(m: Microstructure, n: Optional[int]) -> Microstructure:
    if n is None or n == m.n:
        return m
    factor, rest = divmod(n, m.n)
    if rest or factor < 1:
        raise ValueError(f"resolution {n} is not a multiple of the raster resolution {m.n}")
    return refine(m, factor)


def lambda_per(
    m: Microstructure,
    n: Optional[int] = None,
    eig_tol: Optional[float] = None,
    method: str = 'inverse-iteration',
) -> float:
    """
    Smallest periodic Rayleigh quotient at resolution n (default: the raster's).

    Args:
        m: microstructure
        n: Fourier–Galerkin resolution, a multiple of m.n and at least 8
        eig_tol: absolute tolerance on the eigenvalue
        method: 'inverse-iteration' or 'lobpcg'
    """
    m = _at_resolution(m, n)
    if m.n < 8:
        raise ValueError(f"resolution must be at least 8, got {m.n}")
    return smallest_eigenpair(m, eig_tol=eig_tol, method=method).value


# ---------------------------------------------------------------------------
# Bloch sweep
# ---------------------------------------------------------------------------

def _equal_up_to_shift(a: np.ndarray, b: np.ndarray) -> bool:
    if a.sum() != b.sum():
        return False
    fa = np.fft.fft2(a.astype(float))
    fb = np.fft.fft2(b.astype(float))
    corr = np.fft.ifft2(fa * np.conj(fb)).real
    return bool(np.isclose(corr.max(), float(a.sum()), atol=1e-6))


def is_square_symmetric(m: Microstructure) -> bool:
    """chi invariant, up to a cyclic shift, under 90° rotation and transposition."""
    chi = m.chi
    return _equal_up_to_shift(chi, rotate90(m).chi) and _equal_up_to_shift(chi, chi.T)


def _wedge_representative(i: int, j: int, k_grid: int) -> Tuple[int, int]:
    orbit = set()
    a, b = i, j
    for _ in range(4):
        a, b = (-b) % k_grid, a % k_grid
        orbit.add((a, b))
        orbit.add((b, a))
    return min(orbit)


def bloch_sweep(
    m: Microstructure,
    k_grid: int = 8,
    n: Optional[int] = None,
    eig_tol: Optional[float] = None,
    reduce_wedge: bool = False,
    workers: Optional[int] = None,
    method: str = 'inverse-iteration',
) -> List[Tuple[Tuple[float, float], float]]:
    """
    Smallest Bloch quotient at each k on the uniform k_grid x k_grid grid of
    [0,1)², in lexicographic order of k. At k = 0 the mean mode is excluded.
    """
    if k_grid < 2:
        raise ValueError(f"k_grid must be at least 2, got {k_grid}")
    m = _at_resolution(m, n)
    workers = workers or get_config()['workers']

    points = [(i, j) for i in range(k_grid) for j in range(k_grid)]
    if reduce_wedge and is_square_symmetric(m):
        representative = {p: _wedge_representative(*p, k_grid) for p in points}
        logger.info(f"📋 Square-symmetric raster: {len(set(representative.values()))} of {len(points)} k-points solved")
    else:
        if reduce_wedge:
            logger.warning("⚠️ Wedge reduction requested but raster is not square-symmetric; solving full grid")
        representative = {p: p for p in points}

    unique = sorted(set(representative.values()))
    logger.info(f"🔄 Bloch sweep: {len(unique)} quasi-momenta at n={m.n} (workers={workers})")
    values = Parallel(n_jobs=workers, prefer='threads')(
        delayed(smallest_eigenpair)(m, (i / k_grid, j / k_grid), eig_tol, None, None, method)
        for i, j in unique
    )
    by_point = {p: r.value for p, r in zip(unique, values)}
    return [((i / k_grid, j / k_grid), by_point[representative[(i, j)]]) for i, j in points]


# ---------------------------------------------------------------------------
# Comparison certificate and homogenized bounds
# ---------------------------------------------------------------------------

def underline_moduli(m: Microstructure) -> IsotropicModuli:
    """μ̲ = μ₁ and λ̲ = inf over present phases of (λ+μ) minus μ₁."""
    mu1 = m.phase1.mu
    bulk_inf = min(p.bulk for p in m.present_phases())
    return IsotropicModuli(lam=bulk_inf - mu1, mu=mu1)


def comparison_certificate(m: Microstructure, tol: Optional[float] = None) -> ComparisonCertificate:
    """
    Comparison argument: L(x) − L̲ PSD pointwise and L̲ strongly elliptic
    certify Λ ≥ 0.
    """
    tol = tol if tol is not None else get_config()['psd_tol']
    under = underline_moduli(m)
    L_under = isotropic(under)

    gaps = {}
    psd = True
    present = (bool(m.chi.any()), not m.chi.all())
    for name, phase, occupied in (('phase1', m.phase1, present[0]), ('phase2', m.phase2, present[1])):
        if not occupied:
            continue
        gaps[name] = {'bulk': phase.bulk - under.bulk, 'shear': phase.mu - under.mu}
        psd = psd and is_psd(isotropic(phase) - L_under, tol)

    report: EllipticityReport = rank_one_min(L_under)
    scale = max(L_under.norm, 1.0)
    certified = psd and report.min_value >= -max(tol, 1e-12) * scale
    if certified:
        logger.info(f"✅ Comparison certificate holds with underline moduli ({under.lam:g}, {under.mu:g})")
    else:
        logger.warning("⚠️ Comparison certificate fails: Λ ≥ 0 not certified")
    return ComparisonCertificate(
        comparison_psd=bool(certified),
        underline_moduli=under,
        underline_rank_one_min=report.min_value,
        gaps=gaps,
    )


def homogenized_bounds(m: Microstructure, lstar: Tensor4, tol: Optional[float] = None) -> HomogenizedBoundsReport:
    """
    Comparison lower bounds on L*: (K*, μ*) ≥ (−μ₁, μ₁) and the volume-average
    bound min_a a⊗a·⟨L⟩a⊗a = ⟨λ+2μ⟩.
    """
    tol = tol if tol is not None else get_config()['psd_tol']
    projection, residual = project_isotropic(lstar)
    mu1 = m.phase1.mu
    theta = m.volume_fraction
    average = theta * m.phase1.p_wave + (1.0 - theta) * m.phase2.p_wave
    under = isotropic(underline_moduli(m))
    scale = max(lstar.norm, 1.0)
    return HomogenizedBoundsReport(
        projection=projection,
        projection_residual=residual,
        bulk_margin=projection.bulk + mu1,
        shear_margin=projection.mu - mu1,
        comparison_psd=is_psd(lstar - under, tol * scale),
        volume_average_bound=float(average),
        isotropic_conclusion=bool(projection.mu > 0 and projection.p_wave > 0),
    )


def coercivity_report(
    m: Microstructure,
    n: Optional[int] = None,
    eig_tol: Optional[float] = None,
    k_grid: Optional[int] = None,
    reduce_wedge: bool = False,
    workers: Optional[int] = None,
    method: str = 'inverse-iteration',
) -> CoercivityReport:
    """Λ_per, the optional Bloch sweep and the comparison certificate in one report."""
    resolved = _at_resolution(m, n)
    if resolved.n < 8:
        raise ValueError(f"resolution must be at least 8, got {resolved.n}")
    periodic = smallest_eigenpair(resolved, eig_tol=eig_tol, method=method)
    samples: Sequence = []
    if k_grid:
        samples = bloch_sweep(resolved, k_grid, eig_tol=eig_tol, reduce_wedge=reduce_wedge, workers=workers, method=method)
    certificate = comparison_certificate(resolved)
    report = CoercivityReport(
        lambda_per=periodic.value,
        resolution=resolved.n,
        certificate=certificate,
        bloch_samples=list(samples),
        diagnostics={'periodic_eigensolve': periodic.to_json()},
    )
    if periodic.value <= 0:
        logger.warning(f"⚠️ Λ_per = {periodic.value:.6e} ≤ 0 at n={resolved.n}")
    if certificate.comparison_psd and report.lambda_bloch_min is not None:
        floor = -(eig_tol or get_config()['eig_tol'])
        if report.lambda_bloch_min < floor:
            logger.warning(f"⚠️ Bloch minimum {report.lambda_bloch_min:.6e} below −eig_tol despite certificate")
    return report
