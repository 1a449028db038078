# homogenization/engine/nulllag.py
"""
Null-Lagrangian rewrite of the energy density.

For isotropic phase i and any gradient G with (a, b) = (G11, G22) and
(c, d) = (G12, G21):

    G·LⁱG + 4μ₁ det G = P_i(a, b) + R_i(c, d)
    P_i(a, b) = λᵢ(a+b)² + 2μᵢ(a²+b²) + 4μ₁ab
    R_i(c, d) = μᵢ(c+d)² − 4μ₁cd

Since ∫ det ∇v = 0 for periodic v, the shift leaves the cell energy
unchanged. When 0 < μ₁ = −(λ₂+μ₂) < μ₂ and K₁ > 0 the forms are PSD and
satisfy

    P ≥ α(a+b)²χ + α(a−b)²(1−χ),    R ≥ α(c−d)²χ + α(c²+d²)(1−χ).
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from .errors import HomogenizationError
from .microgeom import EQUALITY_RTOL, Microstructure
from .spectral import TWO_PI, band_frequencies
from .tensor2d import IsotropicModuli, to_mandel_vector

logger = logging.getLogger(__name__)

PLUS = np.array([1.0, 1.0])
MINUS = np.array([1.0, -1.0])

# which direction each form must dominate; None means the identity
_BOUND_DIRECTIONS = {
    'P1': PLUS,
    'R1': MINUS,
    'P2': MINUS,
    'R2': None,
}


def p_matrix(phase: IsotropicModuli, mu1: float) -> np.ndarray:
    lam, mu = phase.lam, phase.mu
    return np.array([[lam + 2 * mu, lam + 2 * mu1], [lam + 2 * mu1, lam + 2 * mu]])


def r_matrix(phase: IsotropicModuli, mu1: float) -> np.ndarray:
    mu = phase.mu
    return np.array([[mu, mu - 2 * mu1], [mu - 2 * mu1, mu]])


def _largest_multiple(P: np.ndarray, q: Optional[np.ndarray]) -> float:
    """
    Largest α with P − α q qᵀ ⪰ 0 (P − α I ⪰ 0 when q is None).

    −inf when P is indefinite, 0 when q leaves the range of P.
    """
    w, V = np.linalg.eigh(P)
    tol = 1e-12 * max(np.abs(w).max(), 1.0)
    if q is None:
        return float(w[0])
    if w[0] < -tol:
        return -math.inf
    coords = V.T @ q
    null = w <= tol
    if np.any(null & (np.abs(coords) > 1e-12 * np.linalg.norm(q))):
        return 0.0
    return float(1.0 / np.sum(coords[~null] ** 2 / w[~null]))


def _kernel(P: np.ndarray) -> Optional[List[float]]:
    w, V = np.linalg.eigh(P)
    tol = 1e-12 * max(np.abs(w).max(), 1.0)
    if abs(w[0]) > tol:
        return None
    v = V[:, 0]
    pivot = v[0] if abs(v[0]) > 1e-12 else v[1]
    return [float(x) for x in v / pivot]


def phase_conditions_hold(phase1: IsotropicModuli, phase2: IsotropicModuli) -> bool:
    """0 < μ₁ = −(λ₂+μ₂) < μ₂ and K₁ > 0, equality to relative EQUALITY_RTOL."""
    scale = max(abs(phase1.mu), abs(phase2.lam), abs(phase2.mu), np.finfo(float).tiny)
    return (
        phase1.mu > 0
        and abs(phase1.mu + phase2.bulk) <= EQUALITY_RTOL * scale
        and phase1.mu < phase2.mu
        and phase1.bulk > 0
    )


@dataclass(frozen=True, eq=False)
class DensityDecomposition:
    phase1: IsotropicModuli
    phase2: IsotropicModuli
    forms: Dict[str, np.ndarray]
    alpha: Optional[float]
    alpha_terms: Dict[str, float] = field(default_factory=dict)
    alpha_numeric: Dict[str, float] = field(default_factory=dict)
    kernels: Dict[str, Optional[List[float]]] = field(default_factory=dict)

    @property
    def mu1(self) -> float:
        return self.phase1.mu

    @property
    def applicable(self) -> bool:
        return self.alpha is not None

    def split(self, phase: int, G: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """(P_i(a, b), R_i(c, d)) for a (2, 2, ...) stack of gradients."""
        G = np.asarray(G, dtype=float)
        ab = np.stack([G[0, 0], G[1, 1]])
        cd = np.stack([G[0, 1], G[1, 0]])
        P, R = self.forms[f'P{phase}'], self.forms[f'R{phase}']
        return (
            np.einsum('i...,ij,j...->...', ab, P, ab),
            np.einsum('i...,ij,j...->...', cd, R, cd),
        )

    def to_json(self) -> Dict[str, Any]:
        return {
            'mu1': self.mu1,
            'forms': {name: matrix.tolist() for name, matrix in self.forms.items()},
            'alpha': self.alpha if self.alpha is not None else 'not-applicable',
            'alpha_terms': dict(self.alpha_terms),
            'alpha_numeric': dict(self.alpha_numeric),
            'kernels': dict(self.kernels),
        }


def decompose(phase1: IsotropicModuli, phase2: IsotropicModuli) -> DensityDecomposition:
    """
    Quadratic forms P_i, R_i and the coercivity constant α.

    Under the phase conditions the four constants have closed forms
    λ₁+2μ₁, μ₁, μ₂−μ₁ and min(2μ₁, 2(μ₂−μ₁)); each is checked against the
    value computed from the eigen-decomposition of its form.

    Raises:
        HomogenizationError: a closed form disagrees with its eigen computation.
    """
    mu1 = phase1.mu
    forms = {
        'P1': p_matrix(phase1, mu1),
        'R1': r_matrix(phase1, mu1),
        'P2': p_matrix(phase2, mu1),
        'R2': r_matrix(phase2, mu1),
    }
    kernels = {name: _kernel(matrix) for name, matrix in forms.items()}
    numeric = {name: _largest_multiple(forms[name], q) for name, q in _BOUND_DIRECTIONS.items()}

    if not phase_conditions_hold(phase1, phase2):
        logger.info("📋 Phase conditions fail: α not applicable")
        return DensityDecomposition(phase1, phase2, forms, None, {}, numeric, kernels)

    closed = {
        'P1': phase1.p_wave,
        'R1': mu1,
        'P2': phase2.mu - mu1,
        'R2': min(2 * mu1, 2 * (phase2.mu - mu1)),
    }
    scale = max(abs(phase1.p_wave), abs(phase2.p_wave), abs(phase2.mu), abs(mu1))
    for name, value in closed.items():
        if abs(value - numeric[name]) > 1e-10 * scale:
            raise HomogenizationError(
                f"closed-form constant for {name} ({value!r}) disagrees with eigen computation ({numeric[name]!r})"
            )

    alpha = min(closed.values())
    logger.info(f"✅ Density decomposition: α = {alpha:g}")
    return DensityDecomposition(phase1, phase2, forms, float(alpha), closed, numeric, kernels)


# ---------------------------------------------------------------------------
# Fields on the n grid
# ---------------------------------------------------------------------------

def spectral_gradient(field: np.ndarray) -> np.ndarray:
    """
    Gradient of a real periodic 2-vector field sampled on the n grid,
    [i, j] = ∂_j v_i, computed from its band-limited part (Nyquist dropped).
    """
    field = np.asarray(field, dtype=float)
    n = field.shape[-1]
    q, in_band = band_frequencies(n)
    mask = np.outer(in_band, in_band)
    vhat = np.fft.fft2(field, axes=(-2, -1)) * mask
    q1, q2 = np.meshgrid(q, q, indexing='ij')
    kappa = np.stack([q1, q2])
    grad_hat = TWO_PI * 1j * vhat[:, None] * kappa[None, :]
    return np.fft.ifft2(grad_hat, axes=(-2, -1)).real


def determinant(G: np.ndarray) -> np.ndarray:
    return G[0, 0] * G[1, 1] - G[0, 1] * G[1, 0]


def null_lagrangian_integral(field: np.ndarray) -> float:
    """Quadrature of ∫ det ∇v over the torus; zero up to rounding."""
    return float(determinant(spectral_gradient(field)).mean())


def shifted_density(m: Microstructure, G_field: np.ndarray) -> np.ndarray:
    """G·L(x)G + 4μ₁ det G per cell for a (2, 2, n, n) gradient field."""
    G_field = np.asarray(G_field, dtype=float)
    if G_field.shape != (2, 2, m.n, m.n):
        raise ValueError(f"gradient field must have shape (2, 2, {m.n}, {m.n}), got {G_field.shape}")
    L1, L2 = m.phase_tensors()
    s = to_mandel_vector(G_field)
    stress = np.einsum('ab,bxy->axy', L2.mandel, s) + m.chi * np.einsum('ab,bxy->axy', L1.mandel - L2.mandel, s)
    energy = np.einsum('axy,axy->xy', s, stress)
    return energy + 4.0 * m.phase1.mu * determinant(G_field)


def bound_slack(decomposition: DensityDecomposition, m: Microstructure, G_field: np.ndarray) -> Dict[str, float]:
    """
    Smallest pointwise slack of the two lower bounds on P and R over the
    cells of m; both are ≥ 0 when the bounds hold.
    """
    if not decomposition.applicable:
        raise ValueError("bound slack needs the phase conditions; α is not applicable")
    G_field = np.asarray(G_field, dtype=float)
    alpha = decomposition.alpha
    a, b = G_field[0, 0], G_field[1, 1]
    c, d = G_field[0, 1], G_field[1, 0]
    chi = m.chi.astype(bool)

    P1, R1 = decomposition.split(1, G_field)
    P2, R2 = decomposition.split(2, G_field)
    slack_p = np.where(chi, P1 - alpha * (a + b) ** 2, P2 - alpha * (a - b) ** 2)
    slack_r = np.where(chi, R1 - alpha * (c - d) ** 2, R2 - alpha * (c ** 2 + d ** 2))
    return {'P': float(slack_p.min()), 'R': float(slack_r.min())}
