# homogenization/engine/spectral.py
"""
Fourier–Galerkin discretisation of the periodic elastic energy.

Unknown fields are periodic 2-vector fields w stored as Fourier
coefficients on the n x n frequency lattice (numpy FFT ordering). The
Galerkin space keeps integer frequencies |q_j| ≤ n/2 − 1 (the unpaired
Nyquist row/column is dropped), so the space at resolution n is contained
in the space at 2n.

The coefficient field is the exact pixel function of the raster (cell c
centred at c/n). Its exact Fourier coefficients up to |q_j| ≤ n − 1 are
synthesised on a 2n x 2n grid; products with strains are formed there,
which makes every discrete energy the exact integral over the torus for
band-limited fields.

A quasi-momentum k turns the gradient into ∇ + 2πi k⊗, giving the Bloch
forms used by the coercivity estimates; k = 0 is the periodic cell problem
with the mean mode removed.
"""
import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np

from .microgeom import Microstructure
from .tensor2d import IsotropicModuli, from_mandel_vector, to_mandel_vector

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi


def band_frequencies(n: int) -> Tuple[np.ndarray, np.ndarray]:
    """Integer frequencies of the n-lattice (FFT order) and the in-band flags."""
    q = np.rint(np.fft.fftfreq(n, d=1.0 / n)).astype(int)
    return q, np.abs(q) <= n // 2 - 1


def default_reference(m: Microstructure) -> IsotropicModuli:
    """
    Very strongly elliptic reference medium for preconditioning:
    μ0 = (μ1+μ2)/2 and λ0 + μ0 = max(K1, μ0).
    """
    mu0 = 0.5 * (m.phase1.mu + m.phase2.mu)
    if mu0 <= 0:
        mu0 = max(abs(m.phase1.mu), abs(m.phase2.mu), 1.0)
    bulk0 = max(m.phase1.bulk, mu0)
    return IsotropicModuli.from_bulk_shear(bulk0, mu0)


def pixel_indicator_coefficients(chi: np.ndarray) -> np.ndarray:
    """
    Exact Fourier coefficients of the pixel indicator on the 2n grid.

    Entry at fine index (q mod 2n) holds ∫ χ e^{-2πi q·x} dx for |q_j| ≤ n−1,
    and zero at q_j = −n.
    """
    n = chi.shape[0]
    N = 2 * n
    q = np.rint(np.fft.fftfreq(N, d=1.0 / N)).astype(int)
    keep = np.abs(q) <= n - 1
    cell = np.fft.fft2(chi.astype(float)) / n ** 2
    shape = np.sinc(q / n)
    coeffs = cell[np.ix_(q % n, q % n)] * np.outer(shape, shape)
    coeffs *= np.outer(keep, keep)
    return coeffs


@dataclass
class CGResult:
    x: np.ndarray
    iterations: int
    residual: float
    converged: bool
    indefinite: bool = False
    curvature: float = 0.0
    direction: Optional[np.ndarray] = None
    history: Optional[list] = None


def conjugate_gradient(
    apply: Callable[[np.ndarray], np.ndarray],
    rhs: np.ndarray,
    precondition: Callable[[np.ndarray], np.ndarray],
    tol: float,
    max_iter: int,
    x0: Optional[np.ndarray] = None,
    gram: Optional[Callable[[np.ndarray], np.ndarray]] = None,
    curvature_floor: float = 0.0,
) -> CGResult:
    """
    Preconditioned conjugate gradient for a Hermitian operator.

    Stops on relative residual ≤ tol, on max_iter, or at the first search
    direction with non-positive curvature (reported, not raised). With `gram`
    given, curvature at or below curvature_floor·(p, gram p) counts as
    non-positive. Reductions run in a fixed order, so the iteration is
    deterministic.
    """
    x = np.zeros_like(rhs) if x0 is None else x0.copy()
    b_norm = float(np.linalg.norm(rhs))
    if b_norm == 0.0:
        return CGResult(x=np.zeros_like(rhs), iterations=0, residual=0.0, converged=True, history=[])

    r = rhs - apply(x) if x0 is not None else rhs.copy()
    z = precondition(r)
    p = z.copy()
    rz = float(np.vdot(r, z).real)
    residual = float(np.linalg.norm(r)) / b_norm
    history = [residual]
    if residual <= tol:
        return CGResult(x=x, iterations=0, residual=residual, converged=True, history=history)

    for iteration in range(1, max_iter + 1):
        Ap = apply(p)
        curvature = float(np.vdot(p, Ap).real)
        floor = curvature_floor * float(np.vdot(p, gram(p)).real) if gram is not None else 0.0
        if curvature <= floor:
            logger.debug(f"CG: non-positive curvature {curvature:.3e} at iteration {iteration}")
            return CGResult(
                x=x, iterations=iteration, residual=residual, converged=False,
                indefinite=True, curvature=curvature, direction=p, history=history,
            )
        alpha = rz / curvature
        x += alpha * p
        r -= alpha * Ap
        residual = float(np.linalg.norm(r)) / b_norm
        history.append(residual)
        if residual <= tol:
            return CGResult(x=x, iterations=iteration, residual=residual, converged=True, history=history)
        z = precondition(r)
        rz_next = float(np.vdot(r, z).real)
        p = z + (rz_next / rz) * p
        rz = rz_next

    return CGResult(x=x, iterations=max_iter, residual=residual, converged=False, history=history)


class SpectralCell:
    """
    Elastic energy of one microstructure on the Fourier–Galerkin space.

    Args:
        m: microstructure (its raster resolution is the Galerkin resolution)
        quasi_momentum: Bloch vector k in [0,1)²; (0, 0) is the periodic problem
        reference: isotropic reference medium used by the preconditioner
    """

    def __init__(
        self,
        m: Microstructure,
        quasi_momentum: Tuple[float, float] = (0.0, 0.0),
        reference: Optional[IsotropicModuli] = None,
    ):
        self.microstructure = m
        self.n = n = m.n
        self.N = N = 2 * n
        self.quasi_momentum = (float(quasi_momentum[0]), float(quasi_momentum[1]))
        self.reference = reference or default_reference(m)

        q, in_band = band_frequencies(n)
        self._fine_index = q % N
        q1, q2 = np.meshgrid(q, q, indexing='ij')
        self.kappa = np.stack([q1 + self.quasi_momentum[0], q2 + self.quasi_momentum[1]])
        self.kappa_sq = (self.kappa ** 2).sum(axis=0)
        mask = np.outer(in_band, in_band)
        mask &= self.kappa_sq > 0
        self.mask = mask

        L1, L2 = m.phase_tensors()
        self._L2 = L2.mandel
        self._dL = L1.mandel - L2.mandel
        fine_coeffs = pixel_indicator_coefficients(m.chi)
        self.chi_smooth = (np.fft.ifft2(fine_coeffs) * N ** 2).real

    # -- coefficient plumbing -------------------------------------------------

    def zeros(self) -> np.ndarray:
        return np.zeros((2, self.n, self.n), dtype=complex)

    def random(self, rng: np.random.Generator) -> np.ndarray:
        w = rng.standard_normal((2, self.n, self.n)) + 1j * rng.standard_normal((2, self.n, self.n))
        return w * self.mask

    def to_fine(self, coeffs: np.ndarray) -> np.ndarray:
        """Real-space values on the 2n grid of band-limited coefficients (..., n, n)."""
        fine = np.zeros(coeffs.shape[:-2] + (self.N, self.N), dtype=complex)
        idx = self._fine_index
        fine[..., idx[:, None], idx[None, :]] = coeffs * self.mask
        return np.fft.ifft2(fine, axes=(-2, -1)) * self.N ** 2

    def from_fine(self, values: np.ndarray) -> np.ndarray:
        """In-band Fourier coefficients of 2n-grid values."""
        fine = np.fft.fft2(values, axes=(-2, -1)) / self.N ** 2
        idx = self._fine_index
        return fine[..., idx[:, None], idx[None, :]] * self.mask

    def gradient(self, w: np.ndarray) -> np.ndarray:
        """Coefficients of (∇ + 2πi k⊗) w, shape (2, 2, n, n), [i, j] = ∂_j w_i."""
        return TWO_PI * 1j * w[:, None] * self.kappa[None, :] * self.mask

    # -- stiffness field ------------------------------------------------------

    def stress(self, strain_mandel: np.ndarray) -> np.ndarray:
        """L̃(x) ε(x) on the fine grid, Mandel components."""
        return (
            np.einsum('ab,bxy->axy', self._L2, strain_mandel)
            + self.chi_smooth * np.einsum('ab,bxy->axy', self._dL, strain_mandel)
        )

    def fluctuation_strain(self, w: np.ndarray) -> np.ndarray:
        """Mandel strain of w on the fine grid."""
        return to_mandel_vector(self.to_fine(self.gradient(w)))

    def divergence_form(self, stress_mandel: np.ndarray) -> np.ndarray:
        """Coefficients of the linear form z ↦ ∫ conj(∇z) : σ."""
        sigma = self.from_fine(from_mandel_vector(stress_mandel))
        return -TWO_PI * 1j * np.einsum('jxy,ijxy->ixy', self.kappa, sigma) * self.mask

    def apply(self, w: np.ndarray) -> np.ndarray:
        """Elasticity operator A: a(w, z) = Σ conj(z)·(A w)."""
        return self.divergence_form(self.stress(self.fluctuation_strain(w)))

    def load(self, M: np.ndarray) -> np.ndarray:
        """Coefficients of z ↦ ∫ conj(∇z) : L̃ M for a constant strain M."""
        e = np.broadcast_to(to_mandel_vector(np.asarray(M, dtype=float))[:, None, None], (3, self.N, self.N)).astype(complex)
        return self.divergence_form(self.stress(e))

    # -- gradient Gram form and preconditioner -------------------------------

    def apply_gram(self, w: np.ndarray) -> np.ndarray:
        """B: b(w, z) = ∫ conj(∇z)·∇w, diagonal per frequency."""
        return TWO_PI ** 2 * self.kappa_sq * w * self.mask

    def rayleigh_quotient(self, w: np.ndarray) -> float:
        """a(w, w) / b(w, w); an upper bound for the smallest eigenvalue of A v = Λ B v."""
        return float(np.vdot(w, self.apply(w)).real / np.vdot(w, self.apply_gram(w)).real)

    def solve_gram(self, w: np.ndarray) -> np.ndarray:
        safe = np.where(self.mask, self.kappa_sq, 1.0)
        return w / (TWO_PI ** 2 * safe) * self.mask

    def precondition(self, residual: np.ndarray, shift: float = 0.0) -> np.ndarray:
        """Exact inverse of the reference operator A0 − shift·B per frequency."""
        mu0 = self.reference.mu - shift
        p_wave0 = self.reference.p_wave - shift
        safe = np.where(self.mask, self.kappa_sq, 1.0)
        unit = self.kappa / np.sqrt(safe)
        longitudinal = np.einsum('jxy,jxy->xy', unit, residual)
        along = unit * longitudinal
        out = ((residual - along) / mu0 + along / p_wave0) / (TWO_PI ** 2 * safe)
        return out * self.mask

    # -- energies -------------------------------------------------------------

    def energy_density(self, w: np.ndarray, M: Optional[np.ndarray] = None) -> np.ndarray:
        """(M + ∇w)·L̃ (M + ∇w) on the fine grid (real part)."""
        e = self.fluctuation_strain(w)
        if M is not None:
            e = e + to_mandel_vector(np.asarray(M, dtype=float))[:, None, None]
        return np.einsum('axy,axy->xy', np.conj(e), self.stress(e)).real

    def energy(self, w: np.ndarray, M: Optional[np.ndarray] = None) -> float:
        """Exact torus integral of the energy density (mean over the fine grid)."""
        return float(self.energy_density(w, M).mean())

    def bilinear(self, w: np.ndarray, M: np.ndarray, z: np.ndarray, P: np.ndarray) -> float:
        """∫ (P + ∇z)·L (M + ∇w)."""
        e_w = self.fluctuation_strain(w) + to_mandel_vector(np.asarray(M, dtype=float))[:, None, None]
        e_z = self.fluctuation_strain(z) + to_mandel_vector(np.asarray(P, dtype=float))[:, None, None]
        return float(np.einsum('axy,axy->xy', np.conj(e_z), self.stress(e_w)).real.mean())

    def real_space(self, w: np.ndarray) -> np.ndarray:
        """Values of the field on the n grid, shape (2, n, n)."""
        return (np.fft.ifft2(w * self.mask, axes=(-2, -1)) * self.n ** 2).real


def hermitian_part(w: np.ndarray) -> np.ndarray:
    """Coefficients of the real part of the field: (w(q) + conj(w(−q))) / 2."""
    n = w.shape[-1]
    neg = (-np.arange(n)) % n
    mirrored = np.conj(w[..., neg[:, None], neg[None, :]])
    return 0.5 * (w + mirrored)
