import json

import numpy as np
import pytest

from homogenization.engine.microgeom import Microstructure, disk, homogeneous, laminate
from homogenization.engine.tensor2d import IsotropicModuli


# =============================================================================
# Phases
# =============================================================================

@pytest.fixture
def soft_phase() -> IsotropicModuli:
    return IsotropicModuli(lam=1.0, mu=1.0)


@pytest.fixture
def stiff_phase() -> IsotropicModuli:
    return IsotropicModuli(lam=2.0, mu=3.0)


@pytest.fixture
def canonical_phases():
    """(λ, μ) = (0, 1) and (−4, 3): μ₁ = −K₂ = 1, the admissible borderline pair."""
    return IsotropicModuli(lam=0.0, mu=1.0), IsotropicModuli(lam=-4.0, mu=3.0)


# =============================================================================
# Microstructures
# =============================================================================

@pytest.fixture
def two_phase_disk(soft_phase, stiff_phase) -> Microstructure:
    return disk(8, 0.3, soft_phase, stiff_phase)


@pytest.fixture
def two_phase_laminate(soft_phase, stiff_phase) -> Microstructure:
    return laminate(16, 0.5, 1, soft_phase, stiff_phase)


@pytest.fixture
def random_raster(soft_phase, stiff_phase) -> Microstructure:
    chi = np.random.default_rng(7).integers(0, 2, size=(8, 8))
    return Microstructure(chi, soft_phase, stiff_phase)


@pytest.fixture
def unit_homogeneous(soft_phase) -> Microstructure:
    return homogeneous(8, soft_phase)


# =============================================================================
# Run configurations
# =============================================================================

@pytest.fixture
def write_config(tmp_path):
    """Write a JSON run configuration under tmp_path and return its path."""
    def _write(data, name='run.json'):
        path = tmp_path / name
        path.write_text(json.dumps(data), encoding='utf-8')
        return path
    return _write


@pytest.fixture
def canonical_phase_config():
    return {'phase1': {'lambda': 0.0, 'mu': 1.0}, 'phase2': {'lambda': -4.0, 'mu': 3.0}}
