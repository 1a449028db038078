"""Null-Lagrangian shift of the energy density and the coercivity constant α."""
import numpy as np
import pytest
from numpy.testing import assert_allclose

from homogenization.engine.microgeom import laminate
from homogenization.engine.nulllag import (
    bound_slack,
    decompose,
    determinant,
    null_lagrangian_integral,
    phase_conditions_hold,
    shifted_density,
    spectral_gradient,
)
from homogenization.engine.tensor2d import IsotropicModuli, isotropic, to_mandel_vector


def plain_density(phase, G):
    s = to_mandel_vector(G)
    return np.einsum('a...,ab,b...->...', s, isotropic(phase).mandel, s)


@pytest.fixture
def canonical(canonical_phases):
    return decompose(*canonical_phases)


@pytest.fixture
def random_gradients():
    return np.random.default_rng(11).standard_normal((2, 2, 10_000))


# =============================================================================
# Quadratic forms
# =============================================================================

def test_canonical_forms(canonical):
    assert_allclose(canonical.forms['P1'], [[2.0, 2.0], [2.0, 2.0]])
    assert_allclose(canonical.forms['R1'], [[1.0, -1.0], [-1.0, 1.0]])
    assert_allclose(canonical.forms['P2'], [[2.0, -2.0], [-2.0, 2.0]])
    assert_allclose(canonical.forms['R2'], [[3.0, 1.0], [1.0, 3.0]])


def test_canonical_kernels(canonical):
    assert canonical.kernels['P1'] == pytest.approx([1.0, -1.0])
    assert canonical.kernels['R1'] == pytest.approx([1.0, 1.0])
    assert canonical.kernels['P2'] == pytest.approx([1.0, 1.0])
    assert canonical.kernels['R2'] is None


def test_canonical_alpha(canonical):
    assert canonical.applicable
    assert canonical.alpha == pytest.approx(1.0)
    assert canonical.alpha_terms == pytest.approx({'P1': 2.0, 'R1': 1.0, 'P2': 2.0, 'R2': 2.0})
    assert canonical.alpha_numeric == pytest.approx(canonical.alpha_terms)


def test_alpha_for_generic_admissible_pair():
    # μ₁ = 2, μ₂ = 5, K₂ = −2
    decomposition = decompose(IsotropicModuli(lam=1.0, mu=2.0), IsotropicModuli(lam=-7.0, mu=5.0))
    assert decomposition.alpha_terms == pytest.approx({'P1': 5.0, 'R1': 2.0, 'P2': 3.0, 'R2': 4.0})
    assert decomposition.alpha == pytest.approx(2.0)


def test_alpha_not_applicable(soft_phase, stiff_phase):
    decomposition = decompose(soft_phase, stiff_phase)
    assert decomposition.alpha is None
    assert not decomposition.applicable
    data = decomposition.to_json()
    assert data['alpha'] == 'not-applicable'
    assert set(data['alpha_numeric']) == {'P1', 'R1', 'P2', 'R2'}


@pytest.mark.parametrize("phase1, phase2, expected", [
    ((0.0, 1.0), (-4.0, 3.0), True),
    ((0.0, 1.0), (-4.0, 1.0), False),   # μ₁ ≠ −K₂
    ((0.0, 1.0), (-2.0, 1.0), False),   # μ₁ = μ₂
    ((-1.0, 1.0), (-4.0, 3.0), False),  # K₁ = 0
    ((0.0, -1.0), (2.0, 3.0), False),   # μ₁ < 0
])
def test_phase_conditions(phase1, phase2, expected):
    p1 = IsotropicModuli(lam=phase1[0], mu=phase1[1])
    p2 = IsotropicModuli(lam=phase2[0], mu=phase2[1])
    assert phase_conditions_hold(p1, p2) == expected


# =============================================================================
# Pointwise identity and bounds
# =============================================================================

@pytest.mark.parametrize("phase", [1, 2])
def test_shifted_density_splits_into_forms(canonical, canonical_phases, random_gradients, phase):
    G = random_gradients
    lhs = plain_density(canonical_phases[phase - 1], G) + 4.0 * canonical.mu1 * determinant(G)
    P, R = canonical.split(phase, G)
    assert_allclose(P + R, lhs, rtol=1e-12, atol=1e-12)


def test_forms_are_bounded_below(canonical, canonical_phases):
    m = laminate(8, 0.5, 1, *canonical_phases)
    G = np.random.default_rng(12).standard_normal((2, 2, 8, 8))
    slack = bound_slack(canonical, m, G)
    assert slack['P'] >= -1e-12
    assert slack['R'] >= -1e-12


def test_bound_is_sharp_on_kernel_directions(canonical, canonical_phases):
    m = laminate(8, 0.5, 1, *canonical_phases)
    # a = −b in phase 1 makes P1 and the (a+b)² bound vanish together
    G = np.zeros((2, 2, 8, 8))
    G[0, 0], G[1, 1] = 1.0, -1.0
    assert bound_slack(canonical, m, G)['P'] == pytest.approx(0.0, abs=1e-12)


def test_bound_slack_needs_phase_conditions(soft_phase, stiff_phase, two_phase_disk):
    decomposition = decompose(soft_phase, stiff_phase)
    with pytest.raises(ValueError, match="phase conditions"):
        bound_slack(decomposition, two_phase_disk, np.zeros((2, 2, 8, 8)))


# =============================================================================
# Fields on the grid
# =============================================================================

def test_determinant_integrates_to_zero():
    rng = np.random.default_rng(13)
    for _ in range(100):
        field = rng.standard_normal((2, 16, 16))
        G = spectral_gradient(field)
        assert abs(null_lagrangian_integral(field)) <= 1e-10 * np.abs(G).max() ** 2


def test_spectral_gradient_of_single_mode():
    n = 8
    x2 = np.arange(n)[None, :] / n * np.ones((n, 1))
    field = np.stack([np.sin(2 * np.pi * x2), np.zeros((n, n))])
    G = spectral_gradient(field)
    assert_allclose(G[0, 1], 2 * np.pi * np.cos(2 * np.pi * x2), atol=1e-12)
    assert_allclose(G[0, 0], 0.0, atol=1e-12)


def test_shift_leaves_cell_energy_unchanged(canonical_phases):
    m = laminate(16, 0.5, 1, *canonical_phases)
    G = spectral_gradient(np.random.default_rng(14).standard_normal((2, 16, 16)))
    chi = m.chi.astype(bool)
    plain = np.where(chi, plain_density(m.phase1, G), plain_density(m.phase2, G))
    shifted = shifted_density(m, G)
    assert shifted.mean() == pytest.approx(plain.mean(), abs=1e-10 * np.abs(plain).max())
    assert_allclose(shifted - plain, 4.0 * m.phase1.mu * determinant(G), atol=1e-10 * np.abs(plain).max())


def test_shifted_density_rejects_wrong_shape(two_phase_disk):
    with pytest.raises(ValueError, match="shape"):
        shifted_density(two_phase_disk, np.zeros((2, 2, 4, 4)))
