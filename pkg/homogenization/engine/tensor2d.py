# homogenization/engine/tensor2d.py
"""
Fourth-order elasticity tensors in 2D.

Tensors are stored as symmetric 3x3 Mandel matrices in the orthonormal
basis {e1⊗e1, e2⊗e2, (e1⊗e2+e2⊗e1)/√2}, component order (11, 22, 12).
The shear row/column carries the √2 factor, so the Frobenius inner product
of symmetric matrices is the Euclidean product of Mandel vectors and
eigenvalues of the Mandel matrix are eigenvalues of the quadratic form.

A tensor acts on a full 2x2 gradient through its symmetric part.
"""
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, Optional, Tuple

import numpy as np
from scipy.optimize import minimize

from .config import get_setting

logger = logging.getLogger(__name__)

SQRT2 = math.sqrt(2.0)
MANDEL_ORDER = '11,22,12'
MANDEL_SHEAR_CONVENTION = 'sqrt2'


@dataclass(frozen=True)
class IsotropicModuli:
    """Lamé pair (λ, μ) of a 2D isotropic stiffness; K = λ + μ."""

    lam: float
    mu: float

    @property
    def bulk(self) -> float:
        return self.lam + self.mu

    @property
    def p_wave(self) -> float:
        """λ + 2μ, the longitudinal modulus."""
        return self.lam + 2.0 * self.mu

    @property
    def very_strongly_elliptic(self) -> bool:
        return self.mu > 0 and self.bulk > 0

    @property
    def strictly_strongly_elliptic(self) -> bool:
        return self.mu > 0 and self.p_wave > 0

    @classmethod
    def from_bulk_shear(cls, bulk: float, mu: float) -> 'IsotropicModuli':
        return cls(lam=bulk - mu, mu=mu)

    def scaled(self, factor: float) -> 'IsotropicModuli':
        return IsotropicModuli(lam=factor * self.lam, mu=factor * self.mu)

    def to_json(self) -> Dict[str, float]:
        return {'lambda': float(self.lam), 'mu': float(self.mu)}

    @classmethod
    def from_json(cls, data: Dict[str, Any]) -> 'IsotropicModuli':
        return cls(lam=float(data['lambda']), mu=float(data['mu']))


@dataclass(frozen=True, eq=False)
class Tensor4:
    """Elasticity tensor with major and minor symmetries, Mandel storage."""

    mandel: np.ndarray

    def __post_init__(self):
        arr = np.array(self.mandel, dtype=float)
        if arr.shape != (3, 3):
            raise ValueError(f"Mandel matrix must be 3x3, got shape {arr.shape}")
        scale = max(np.abs(arr).max(), 1.0)
        if np.abs(arr - arr.T).max() > 1e-10 * scale:
            raise ValueError("Mandel matrix is not symmetric (tensor lacks major symmetry)")
        arr = 0.5 * (arr + arr.T)
        arr.setflags(write=False)
        object.__setattr__(self, 'mandel', arr)

    def __add__(self, other: 'Tensor4') -> 'Tensor4':
        return Tensor4(self.mandel + other.mandel)

    def __sub__(self, other: 'Tensor4') -> 'Tensor4':
        return Tensor4(self.mandel - other.mandel)

    def __mul__(self, factor: float) -> 'Tensor4':
        return Tensor4(float(factor) * self.mandel)

    __rmul__ = __mul__

    def __neg__(self) -> 'Tensor4':
        return Tensor4(-self.mandel)

    @property
    def norm(self) -> float:
        """Frobenius norm of the Mandel matrix (= tensor norm)."""
        return float(np.linalg.norm(self.mandel))

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.mandel)

    def allclose(self, other: 'Tensor4', rtol: float = 1e-12, atol: float = 1e-12) -> bool:
        return bool(np.allclose(self.mandel, other.mandel, rtol=rtol, atol=atol))

    def to_json(self) -> Dict[str, Any]:
        return {
            'mandel': [float(x) for x in self.mandel.reshape(-1)],
            'order': MANDEL_ORDER,
            'shear_convention': MANDEL_SHEAR_CONVENTION,
        }

    @classmethod
    def from_json(cls, data: Dict[str, Any]) -> 'Tensor4':
        values = data['mandel']
        if len(values) != 9:
            raise ValueError(f"'mandel' must hold 9 row-major entries, got {len(values)}")
        return cls(np.asarray(values, dtype=float).reshape(3, 3))

    def __repr__(self) -> str:
        return f"Tensor4(mandel={self.mandel.tolist()!r})"


@dataclass(frozen=True)
class RankOnePair:
    """Unit vectors a, b of a symmetrized rank-one direction a⊗b."""

    a: Tuple[float, float]
    b: Tuple[float, float]

    def __post_init__(self):
        for name in ('a', 'b'):
            vec = tuple(float(x) for x in getattr(self, name))
            if abs(math.hypot(*vec) - 1.0) > 1e-12:
                raise ValueError(f"RankOnePair.{name} must be a unit vector, got {vec}")
            object.__setattr__(self, name, vec)

    @classmethod
    def from_angles(cls, theta: float, phi: float) -> 'RankOnePair':
        return cls((math.cos(theta), math.sin(theta)), (math.cos(phi), math.sin(phi)))

    @property
    def angles(self) -> Tuple[float, float]:
        """Angles of a and b folded into [0, π)."""
        return (
            math.atan2(self.a[1], self.a[0]) % math.pi,
            math.atan2(self.b[1], self.b[0]) % math.pi,
        )

    def matrix(self) -> np.ndarray:
        return np.outer(self.a, self.b)

    def to_json(self) -> Dict[str, Any]:
        return {'a': list(self.a), 'b': list(self.b)}


class Ellipticity(str, Enum):
    STRICT = 'strictly-strongly-elliptic'
    DEGENERATE = 'degenerate'
    NOT_ELLIPTIC = 'not-strongly-elliptic'


@dataclass(frozen=True)
class EllipticityReport:
    min_value: float
    argmin: RankOnePair
    classification: Ellipticity
    method: str = 'grid'
    grid_min: Optional[float] = field(default=None)

    def to_json(self) -> Dict[str, Any]:
        theta, phi = self.argmin.angles
        return {
            'min_value': float(self.min_value),
            'argmin': self.argmin.to_json(),
            'argmin_angles': [theta, phi],
            'classification': self.classification.value,
            'method': self.method,
        }


# ---------------------------------------------------------------------------
# Construction and vector plumbing
# ---------------------------------------------------------------------------

def isotropic(m: IsotropicModuli) -> Tensor4:
    """(L)_pqrs = λ δ_pq δ_rs + μ (δ_pr δ_qs + δ_ps δ_qr) in Mandel form."""
    lam, mu = m.lam, m.mu
    return Tensor4(np.array([
        [lam + 2 * mu, lam, 0.0],
        [lam, lam + 2 * mu, 0.0],
        [0.0, 0.0, 2 * mu],
    ]))


def sym(G: np.ndarray) -> np.ndarray:
    G = np.asarray(G, dtype=float)
    return 0.5 * (G + np.swapaxes(G, 0, 1))


def to_mandel_vector(G: np.ndarray) -> np.ndarray:
    """Mandel vector of sym(G); works on (2, 2, ...) stacks of matrices."""
    G = np.asarray(G)
    return np.stack([G[0, 0], G[1, 1], (G[0, 1] + G[1, 0]) / SQRT2])


def from_mandel_vector(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v)
    off = v[2] / SQRT2
    return np.stack([np.stack([v[0], off]), np.stack([off, v[1]])])


def mandel_basis() -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """The orthonormal basis matrices {e1⊗e1, e2⊗e2, (e1⊗e2+e2⊗e1)/√2}."""
    return tuple(from_mandel_vector(np.eye(3)[p]) for p in range(3))


def apply(L: Tensor4, G: np.ndarray) -> np.ndarray:
    """Stress L : sym(G), as a symmetric 2x2 matrix."""
    return from_mandel_vector(L.mandel @ to_mandel_vector(G))


def energy(L: Tensor4, G: np.ndarray) -> float:
    """sym(G) · L sym(G)."""
    s = to_mandel_vector(G)
    return float(s @ L.mandel @ s)


def component(L: Tensor4, i: int, j: int, k: int, l: int) -> float:
    """Tensor component L_ijkl (zero-based indices) recovered from Mandel storage."""
    def idx(p, q):
        return (p, 1.0) if p == q else (2, SQRT2)
    (a, fa), (b, fb) = idx(i, j), idx(k, l)
    return float(L.mandel[a, b] / (fa * fb))


def rotation_matrix(angle: float) -> np.ndarray:
    """Mandel representation Q of the strain map ε ↦ R ε Rᵀ for rotation R(angle)."""
    c, s = math.cos(angle), math.sin(angle)
    R = np.array([[c, -s], [s, c]])
    return np.column_stack([to_mandel_vector(R @ B @ R.T) for B in mandel_basis()])


def rotate(L: Tensor4, angle: float) -> Tensor4:
    """Tensor of the material rotated by `angle` (counter-clockwise)."""
    Q = rotation_matrix(angle)
    return Tensor4(Q @ L.mandel @ Q.T)


# ---------------------------------------------------------------------------
# Positivity analysis
# ---------------------------------------------------------------------------

def is_psd(L: Tensor4, tol: Optional[float] = None) -> bool:
    """True iff the smallest Mandel eigenvalue is ≥ −tol."""
    if tol is None:
        tol = get_setting('psd_tol')
    return bool(L.eigenvalues()[0] >= -tol)


def project_isotropic(L: Tensor4) -> Tuple[IsotropicModuli, float]:
    """
    Closest isotropic tensor in the sense of the (K, μ) projection.

    Returns:
        (moduli, residual) where moduli.bulk = (L1111+L2222+2L1122)/4,
        moduli.mu = (tr mandel − 2K)/4 and residual is the Frobenius norm of
        the anisotropic remainder.
    """
    M = L.mandel
    bulk = (M[0, 0] + M[1, 1] + 2.0 * M[0, 1]) / 4.0
    mu = (np.trace(M) - 2.0 * bulk) / 4.0
    moduli = IsotropicModuli.from_bulk_shear(float(bulk), float(mu))
    residual = float(np.linalg.norm(M - isotropic(moduli).mandel))
    return moduli, residual


def classify(min_value: float, L: Tensor4, degeneracy_tol: Optional[float] = None) -> Ellipticity:
    """Classification from the rank-one minimum relative to ‖L‖."""
    if degeneracy_tol is None:
        degeneracy_tol = get_setting('degeneracy_tol')
    relative = min_value / max(L.norm, np.finfo(float).tiny)
    if relative > degeneracy_tol:
        return Ellipticity.STRICT
    if relative < -degeneracy_tol:
        return Ellipticity.NOT_ELLIPTIC
    return Ellipticity.DEGENERATE


def _rank_one_energies(L: Tensor4, theta: np.ndarray, phi: np.ndarray) -> np.ndarray:
    ca, sa = np.cos(theta), np.sin(theta)
    cb, sb = np.cos(phi), np.sin(phi)
    s = np.stack([ca * cb, sa * sb, (ca * sb + sa * cb) / SQRT2])
    return np.einsum('i...,ij,j...->...', s, L.mandel, s)


def rank_one_min(
    L: Tensor4,
    grid_n: Optional[int] = None,
    refine_tol: Optional[float] = None,
    degeneracy_tol: Optional[float] = None,
    use_closed_form: bool = True,
) -> EllipticityReport:
    """
    Minimum of (a⊗b)·L(a⊗b) over unit vectors a, b.

    An exhaustive grid_n x grid_n angle grid over [0, π)² brackets the global
    minimum (the objective is a low-degree trigonometric polynomial); a
    Nelder–Mead descent from the best grid point refines it to refine_tol.
    Isotropic tensors use the closed form min(μ, λ+2μ), cross-checked
    against the grid.
    """
    grid_n = grid_n or get_setting('rank_one_grid')
    refine_tol = refine_tol or get_setting('rank_one_refine_tol')
    if grid_n < 8:
        raise ValueError(f"grid_n must be at least 8, got {grid_n}")

    angles = np.arange(grid_n) * (math.pi / grid_n)
    theta, phi = np.meshgrid(angles, angles, indexing='ij')
    values = _rank_one_energies(L, theta, phi)
    i, j = np.unravel_index(np.argmin(values), values.shape)
    grid_min = float(values[i, j])
    scale = max(L.norm, np.finfo(float).tiny)

    moduli, residual = project_isotropic(L)
    if use_closed_form and residual <= 1e-12 * scale:
        mu, p_wave = moduli.mu, moduli.p_wave
        if mu <= p_wave:
            min_value, pair = mu, RankOnePair((1.0, 0.0), (0.0, 1.0))
        else:
            min_value, pair = p_wave, RankOnePair((1.0, 0.0), (1.0, 0.0))
        if grid_min < min_value - 1e-9 * scale:
            logger.warning(
                f"⚠️ Rank-one grid minimum {grid_min:.6e} undercuts closed form {min_value:.6e}"
            )
        return EllipticityReport(
            min_value=float(min_value),
            argmin=pair,
            classification=classify(min_value, L, degeneracy_tol),
            method='closed-form',
            grid_min=grid_min,
        )

    def objective(x):
        return float(_rank_one_energies(L, np.array(x[0]), np.array(x[1])))

    result = minimize(
        objective,
        x0=np.array([angles[i], angles[j]]),
        method='Nelder-Mead',
        options={'xatol': refine_tol, 'fatol': refine_tol * scale, 'maxiter': 4000},
    )
    if result.fun < grid_min:
        min_value, (t, p) = float(result.fun), result.x
    else:
        min_value, t, p = grid_min, angles[i], angles[j]
    logger.debug(f"rank_one_min: grid {grid_min:.3e} → refined {min_value:.3e} ({result.nit} its)")

    return EllipticityReport(
        min_value=min_value,
        argmin=RankOnePair.from_angles(float(t), float(p)),
        classification=classify(min_value, L, degeneracy_tol),
        method='grid',
        grid_min=grid_min,
    )
