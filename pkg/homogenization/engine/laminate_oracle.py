# homogenization/engine/laminate_oracle.py
"""
Exact homogenized tensor of a rank-one laminate of two isotropic phases.

Fields depend only on x·n. In each layer the corrector gradient is a
constant a_i⊗n; traction continuity and periodicity fix the a_i, so L* is
available in closed form. Two independent routes are provided:

  * "traction": solve for the common traction t through the acoustic
    tensors K_i = n·Lⁱ·n;
  * "partial_inversion": in the frame where n = e1, average the mixed
    (partially inverted) matrices that map the continuous quantities
    (σ·n, ε22) to the jumping ones, then invert back and rotate.
"""
import logging
import math
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed

from .config import get_config
from .errors import IllPosedLaminateError
from .tensor2d import (
    EllipticityReport,
    IsotropicModuli,
    Tensor4,
    isotropic,
    mandel_basis,
    rank_one_min,
    rotate,
    to_mandel_vector,
)

logger = logging.getLogger(__name__)

ROUTES = ('traction', 'partial_inversion')

# Mandel indices in the frame n = e1: continuous traction (11, 12), tangential strain (22)
_NORMAL = [0, 2]
_TANGENT = [1]


@dataclass(frozen=True)
class LaminateSpec:
    theta: float
    normal: Tuple[float, float]
    phase1: IsotropicModuli
    phase2: IsotropicModuli

    def __post_init__(self):
        if not 0.0 <= self.theta <= 1.0:
            raise ValueError(f"theta must lie in [0, 1], got {self.theta}")
        norm = math.hypot(*self.normal)
        if abs(norm - 1.0) > 1e-12:
            raise ValueError(f"normal must be a unit vector, got |n| = {norm}")
        object.__setattr__(self, 'normal', (float(self.normal[0]), float(self.normal[1])))

    @property
    def angle(self) -> float:
        return math.atan2(self.normal[1], self.normal[0])

    def weighted_phases(self) -> List[Tuple[int, float, IsotropicModuli]]:
        return [(1, self.theta, self.phase1), (2, 1.0 - self.theta, self.phase2)]

    def to_json(self) -> Dict[str, Any]:
        return {
            'theta': self.theta,
            'normal': list(self.normal),
            'phase1': self.phase1.to_json(),
            'phase2': self.phase2.to_json(),
        }


def acoustic_tensor(phase: IsotropicModuli, normal: Sequence[float]) -> np.ndarray:
    """K a = L(a⊗n)n; for isotropic L, K = μI + (λ+μ) n⊗n."""
    n = np.asarray(normal, dtype=float)
    return phase.mu * np.eye(2) + (phase.lam + phase.mu) * np.outer(n, n)


def _check_phases(spec: LaminateSpec):
    for index, weight, phase in spec.weighted_phases():
        if weight == 0.0:
            continue
        scale = max(abs(phase.mu), abs(phase.p_wave), np.finfo(float).tiny)
        if min(abs(phase.mu), abs(phase.p_wave)) <= 1e-14 * scale:
            raise IllPosedLaminateError(
                f"phase {index} has a singular normal block (λ+2μ = {phase.p_wave:g}, μ = {phase.mu:g})",
                phase=index,
            )
        if not phase.strictly_strongly_elliptic:
            logger.warning(f"⚠️ Phase {index} is not strictly strongly elliptic; lamination formula used as is")


def _traction_route(spec: LaminateSpec) -> np.ndarray:
    n = np.asarray(spec.normal)
    layers = []
    for _, weight, phase in spec.weighted_phases():
        if weight == 0.0:
            continue
        L = isotropic(phase)
        layers.append((weight, L, np.linalg.inv(acoustic_tensor(phase, n))))

    compliance = sum(w * K_inv for w, _, K_inv in layers)
    columns = []
    for B in mandel_basis():
        pushes = [(w, L, K_inv, L.mandel @ to_mandel_vector(B)) for w, L, K_inv in layers]
        rhs = sum(w * K_inv @ (_matrix(sigma) @ n) for w, _, K_inv, sigma in pushes)
        t = np.linalg.solve(compliance, rhs)
        average = np.zeros(3)
        for w, L, K_inv, sigma in pushes:
            a = K_inv @ (t - _matrix(sigma) @ n)
            average += w * (sigma + L.mandel @ to_mandel_vector(np.outer(a, n)))
        columns.append(average)
    return np.column_stack(columns)


def _matrix(mandel: np.ndarray) -> np.ndarray:
    off = mandel[2] / math.sqrt(2.0)
    return np.array([[mandel[0], off], [off, mandel[1]]])


def _partial_inversion_route(spec: LaminateSpec) -> np.ndarray:
    H_nn = np.zeros((2, 2))
    H_nt = np.zeros((2, 1))
    H_tn = np.zeros((1, 2))
    H_tt = np.zeros((1, 1))
    for _, weight, phase in spec.weighted_phases():
        if weight == 0.0:
            continue
        C = isotropic(phase).mandel
        C_nn = C[np.ix_(_NORMAL, _NORMAL)]
        C_nt = C[np.ix_(_NORMAL, _TANGENT)]
        C_tn = C[np.ix_(_TANGENT, _NORMAL)]
        C_tt = C[np.ix_(_TANGENT, _TANGENT)]
        inv = np.linalg.inv(C_nn)
        H_nn += weight * inv
        H_nt += weight * (-inv @ C_nt)
        H_tn += weight * (C_tn @ inv)
        H_tt += weight * (C_tt - C_tn @ inv @ C_nt)

    C_nn = np.linalg.inv(H_nn)
    frame = np.zeros((3, 3))
    frame[np.ix_(_NORMAL, _NORMAL)] = C_nn
    frame[np.ix_(_NORMAL, _TANGENT)] = -C_nn @ H_nt
    frame[np.ix_(_TANGENT, _NORMAL)] = H_tn @ C_nn
    frame[np.ix_(_TANGENT, _TANGENT)] = H_tt - H_tn @ C_nn @ H_nt
    return rotate(Tensor4(0.5 * (frame + frame.T)), spec.angle).mandel


def laminate_homogenize(spec: LaminateSpec, route: str = 'traction') -> Tensor4:
    """
    Homogenized tensor of the laminate.

    Raises:
        IllPosedLaminateError: a phase with positive volume fraction has a
            singular normal block.
        ValueError: unknown route.
    """
    if route not in ROUTES:
        raise ValueError(f"unknown lamination route {route!r}; expected one of {ROUTES}")
    if spec.theta == 1.0:
        return isotropic(spec.phase1)
    if spec.theta == 0.0:
        return isotropic(spec.phase2)
    _check_phases(spec)

    mandel = _traction_route(spec) if route == 'traction' else _partial_inversion_route(spec)
    return Tensor4(0.5 * (mandel + mandel.T))


@dataclass(frozen=True)
class FractionSample:
    theta: float
    lstar: Tensor4
    ellipticity: EllipticityReport

    def csv_row(self) -> List[float]:
        angle_a, angle_b = self.ellipticity.argmin.angles
        return [self.theta, self.ellipticity.min_value, angle_a, angle_b]

    def to_json(self, include_tensor: bool = False) -> Dict[str, Any]:
        data = {'theta': self.theta, 'ellipticity': self.ellipticity.to_json()}
        if include_tensor:
            data['lstar'] = self.lstar.to_json()
        return data


def _sample(spec: LaminateSpec, route: str) -> FractionSample:
    lstar = laminate_homogenize(spec, route)
    return FractionSample(theta=spec.theta, lstar=lstar, ellipticity=rank_one_min(lstar))


def ellipticity_vs_fraction(
    thetas: Sequence[float],
    phase1: IsotropicModuli,
    phase2: IsotropicModuli,
    normal: Tuple[float, float] = (1.0, 0.0),
    route: str = 'traction',
    workers: Optional[int] = None,
) -> List[FractionSample]:
    """rank_one_min of the laminate tensor for each volume fraction, in input order."""
    workers = workers or get_config()['workers']
    specs = [LaminateSpec(float(t), normal, phase1, phase2) for t in thetas]
    logger.info(f"🔄 Laminate sweep over {len(specs)} volume fractions (route={route})")
    return Parallel(n_jobs=workers, prefer='threads')(delayed(_sample)(s, route) for s in specs)
