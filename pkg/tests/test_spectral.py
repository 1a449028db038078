"""Conjugate gradient and the Fourier–Galerkin cell operator."""
import numpy as np
import pytest
from numpy.testing import assert_allclose

from homogenization.engine.microgeom import laminate, refine
from homogenization.engine.spectral import (
    SpectralCell,
    band_frequencies,
    conjugate_gradient,
    default_reference,
    hermitian_part,
    pixel_indicator_coefficients,
)


def identity(x):
    return x


# =============================================================================
# Conjugate gradient
# =============================================================================

def test_cg_solves_spd_system():
    rng = np.random.default_rng(1)
    Q = rng.standard_normal((6, 6))
    A = Q @ Q.T + 6 * np.eye(6)
    b = rng.standard_normal(6)
    result = conjugate_gradient(lambda x: A @ x, b, identity, tol=1e-12, max_iter=50)
    assert result.converged
    assert not result.indefinite
    assert_allclose(A @ result.x, b, atol=1e-10)
    assert result.history[0] == pytest.approx(1.0)


def test_cg_zero_rhs_returns_zero():
    result = conjugate_gradient(lambda x: x, np.zeros(4), identity, tol=1e-9, max_iter=10)
    assert result.converged
    assert result.iterations == 0
    assert not result.x.any()


def test_cg_reports_non_positive_curvature():
    A = np.diag([1.0, -1.0])
    result = conjugate_gradient(lambda x: A @ x, np.array([1.0, 1.0]), identity, tol=1e-9, max_iter=10)
    assert result.indefinite
    assert not result.converged
    assert result.curvature <= 0
    assert_allclose(result.direction, [1.0, 1.0])


def test_cg_curvature_floor_relative_to_gram():
    A = np.diag([1.0, 1e-14])
    b = np.array([0.0, 1.0])
    loose = conjugate_gradient(lambda x: A @ x, b, identity, tol=1e-9, max_iter=10)
    assert loose.converged
    floored = conjugate_gradient(
        lambda x: A @ x, b, identity, tol=1e-9, max_iter=10, gram=identity, curvature_floor=1e-10,
    )
    assert floored.indefinite


def test_cg_stops_at_max_iter():
    A = np.diag(np.arange(1.0, 11.0))
    result = conjugate_gradient(lambda x: A @ x, np.ones(10), identity, tol=1e-15, max_iter=2)
    assert not result.converged
    assert result.iterations == 2


# =============================================================================
# Discretisation
# =============================================================================

def test_band_drops_nyquist():
    q, in_band = band_frequencies(8)
    assert sorted(q[in_band]) == [-3, -2, -1, 0, 1, 2, 3]


def test_pixel_coefficients_mean_is_volume_fraction(two_phase_disk):
    coeffs = pixel_indicator_coefficients(two_phase_disk.chi)
    assert coeffs[0, 0].real == pytest.approx(two_phase_disk.volume_fraction)


def test_pixel_coefficients_survive_refinement(two_phase_disk):
    coarse = pixel_indicator_coefficients(two_phase_disk.chi)
    fine = pixel_indicator_coefficients(refine(two_phase_disk, 2).chi)
    # refined cells are centred a quarter coarse cell away: only the phases differ
    n = two_phase_disk.n
    idx = np.r_[0:n, -(n - 1):0]
    assert_allclose(np.abs(fine[np.ix_(idx, idx)]), np.abs(coarse[np.ix_(idx, idx)]), atol=1e-14)


def test_operator_is_hermitian(random_raster):
    cell = SpectralCell(random_raster)
    rng = np.random.default_rng(3)
    w, z = cell.random(rng), cell.random(rng)
    assert np.vdot(z, cell.apply(w)) == pytest.approx(np.conj(np.vdot(w, cell.apply(z))), rel=1e-10)


def test_gram_form_is_gradient_energy(random_raster):
    cell = SpectralCell(random_raster, quasi_momentum=(0.25, 0.5))
    w = cell.random(np.random.default_rng(4))
    grad = cell.to_fine(cell.gradient(w))
    direct = float(np.mean(np.sum(np.abs(grad) ** 2, axis=(0, 1))))
    assert np.vdot(w, cell.apply_gram(w)).real == pytest.approx(direct, rel=1e-10)
    assert_allclose(cell.solve_gram(cell.apply_gram(w)), w * cell.mask, atol=1e-12)


def test_preconditioner_inverts_homogeneous_operator(unit_homogeneous):
    cell = SpectralCell(unit_homogeneous, reference=unit_homogeneous.phase1)
    w = cell.random(np.random.default_rng(5))
    assert_allclose(cell.precondition(cell.apply(w)), w, atol=1e-10)


def test_default_reference_is_very_strongly_elliptic(canonical_phases):
    reference = default_reference(laminate(8, 0.5, 1, *canonical_phases))
    assert reference.very_strongly_elliptic
    assert reference.mu == pytest.approx(2.0)


def test_hermitian_part_gives_real_field():
    rng = np.random.default_rng(6)
    w = rng.standard_normal((2, 8, 8)) + 1j * rng.standard_normal((2, 8, 8))
    values = np.fft.ifft2(hermitian_part(w), axes=(-2, -1))
    assert np.abs(values.imag).max() < 1e-14
