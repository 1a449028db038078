"""Raster generators, PGM codec, symmetry maps and admissibility."""
import numpy as np
import pytest
from numpy.testing import assert_array_equal

from homogenization.engine.errors import InvalidGeometryError, RasterFormatError
from homogenization.engine.microgeom import (
    Microstructure,
    check_admissibility,
    disk,
    from_descriptor,
    from_raster,
    homogeneous,
    laminate,
    matrix_components,
    read_pgm,
    refine,
    rotate90,
    shift,
    to_raster,
    torus_distance,
    write_pgm,
)
from homogenization.engine.tensor2d import IsotropicModuli


# =============================================================================
# Microstructure
# =============================================================================

def test_microstructure_rejects_non_binary(soft_phase):
    with pytest.raises(InvalidGeometryError, match="0 and 1"):
        Microstructure(np.full((4, 4), 2), soft_phase, soft_phase)


def test_microstructure_rejects_non_square(soft_phase):
    with pytest.raises(InvalidGeometryError, match="square"):
        Microstructure(np.zeros((4, 2)), soft_phase, soft_phase)


def test_microstructure_is_read_only(two_phase_disk):
    with pytest.raises(ValueError):
        two_phase_disk.chi[0, 0] = 1


def test_present_phases(soft_phase, stiff_phase):
    assert homogeneous(4, soft_phase, stiff_phase).present_phases() == [soft_phase]
    empty = Microstructure(np.zeros((4, 4)), soft_phase, stiff_phase)
    assert empty.present_phases() == [stiff_phase]
    assert laminate(4, 0.5, 1, soft_phase, stiff_phase).present_phases() == [soft_phase, stiff_phase]


# =============================================================================
# Generators
# =============================================================================

def test_laminate_slab_orientation(soft_phase, stiff_phase):
    m = laminate(8, 0.25, 1, soft_phase, stiff_phase)
    assert m.chi[:2].all() and not m.chi[2:].any()
    m2 = laminate(8, 0.25, 2, soft_phase, stiff_phase)
    assert_array_equal(m2.chi, m.chi.T)


def test_laminate_width_rounds_half_away_from_zero(soft_phase, stiff_phase):
    m = laminate(5, 0.5, 1, soft_phase, stiff_phase)
    assert m.chi.sum() == 3 * 5
    assert m.volume_fraction == pytest.approx(0.6)


@pytest.mark.parametrize("theta, expected", [(0.0, 0.0), (1.0, 1.0)])
def test_laminate_endpoints(soft_phase, stiff_phase, theta, expected):
    assert laminate(8, theta, 1, soft_phase, stiff_phase).volume_fraction == expected


@pytest.mark.parametrize("kwargs", [
    {'n': 8, 'theta': 1.5, 'normal_axis': 1},
    {'n': 8, 'theta': 0.5, 'normal_axis': 3},
    {'n': 1, 'theta': 0.5, 'normal_axis': 1},
])
def test_laminate_rejects_bad_parameters(soft_phase, stiff_phase, kwargs):
    with pytest.raises(InvalidGeometryError):
        laminate(phase1=soft_phase, phase2=stiff_phase, **kwargs)


def test_disk_area_approaches_pi_r_squared(soft_phase, stiff_phase):
    m = disk(128, 0.3, soft_phase, stiff_phase)
    assert m.volume_fraction == pytest.approx(np.pi * 0.09, abs=5e-3)


def test_disk_wraps_around_the_torus(soft_phase, stiff_phase):
    centred = disk(16, 0.25, soft_phase, stiff_phase)
    corner = disk(16, 0.25, soft_phase, stiff_phase, center=(0.0, 0.0))
    assert corner.chi[0, 0] == 1 and corner.chi[-1, -1] == 1
    assert corner.chi.sum() == centred.chi.sum()


@pytest.mark.parametrize("radius", [0.0, 0.5, 0.7])
def test_disk_rejects_radius_outside_open_interval(soft_phase, stiff_phase, radius):
    with pytest.raises(InvalidGeometryError, match="radius"):
        disk(8, radius, soft_phase, stiff_phase)


def test_torus_distance_uses_periodic_images():
    assert torus_distance(np.array([0.95, 0.5]), (0.05, 0.5)) == pytest.approx(0.1)


# =============================================================================
# Symmetry maps
# =============================================================================

def test_refine_keeps_volume_fraction(two_phase_disk):
    fine = refine(two_phase_disk, 2)
    assert fine.n == 16
    assert fine.volume_fraction == two_phase_disk.volume_fraction
    assert_array_equal(fine.chi[::2, ::2], two_phase_disk.chi)


def test_shift_is_cyclic(random_raster):
    shifted = shift(random_raster, 3, -2)
    assert_array_equal(shift(shifted, -3, 2).chi, random_raster.chi)
    assert shifted.volume_fraction == random_raster.volume_fraction


def test_rotate90_four_times_is_identity(random_raster):
    m = random_raster
    for _ in range(4):
        m = rotate90(m)
    assert_array_equal(m.chi, random_raster.chi)


def test_rotate90_turns_laminate_normal(soft_phase, stiff_phase):
    rotated = rotate90(laminate(8, 0.25, 1, soft_phase, stiff_phase))
    # slab perpendicular to e1 becomes a slab perpendicular to e2
    assert (rotated.chi == rotated.chi[:1, :]).all()
    assert rotated.volume_fraction == 0.25


# =============================================================================
# PGM rasters
# =============================================================================

@pytest.mark.parametrize("binary", [False, True])
def test_pgm_round_trip(tmp_path, random_raster, binary):
    path = tmp_path / 'cell.pgm'
    to_raster(random_raster, path, binary=binary, maxval=255)
    loaded = from_raster(path, random_raster.phase1, random_raster.phase2)
    assert_array_equal(loaded.chi, random_raster.chi)


def test_pgm_header_comments_are_skipped(tmp_path, soft_phase):
    path = tmp_path / 'cell.pgm'
    path.write_bytes(b"P2\n# a comment\n2 2\n# another\n1\n1 0\n0 1\n")
    pixels, maxval = read_pgm(path)
    assert maxval == 1
    assert_array_equal(pixels, [[1, 0], [0, 1]])


def test_sixteen_bit_binary_pgm(tmp_path):
    path = tmp_path / 'deep.pgm'
    write_pgm(path, np.array([[0, 1000], [1000, 0]]), 1000, binary=True)
    pixels, maxval = read_pgm(path)
    assert maxval == 1000
    assert pixels[0, 1] == 1000


def test_gray_pixel_is_ambiguous(tmp_path, soft_phase):
    path = tmp_path / 'gray.pgm'
    write_pgm(path, np.array([[0, 128], [255, 0]]), 255)
    with pytest.raises(RasterFormatError, match="ambiguous"):
        from_raster(path, soft_phase, soft_phase)


def test_non_square_raster(tmp_path, soft_phase):
    path = tmp_path / 'wide.pgm'
    write_pgm(path, np.zeros((2, 4), dtype=int), 1)
    with pytest.raises(RasterFormatError, match="square"):
        from_raster(path, soft_phase, soft_phase)


@pytest.mark.parametrize("content", [
    b"P3\n2 2\n1\n0 0 0 0\n",
    b"P2\n2 2\n",
    b"P2\n2 x\n1\n0 0 0 0\n",
    b"P2\n2 2\n1\n0 0 0\n",
    b"P5\n2 2\n255\n\x00",
])
def test_malformed_pgm(tmp_path, content):
    path = tmp_path / 'bad.pgm'
    path.write_bytes(content)
    with pytest.raises(RasterFormatError):
        read_pgm(path)


# =============================================================================
# Admissibility
# =============================================================================

def test_canonical_laminate_is_admissible(canonical_phases):
    m = laminate(8, 0.5, 1, *canonical_phases)
    report = check_admissibility(m)
    assert report.cond_eq3
    assert report.matrix_connected
    assert report.admissible
    assert report.failures() == []


def test_failing_clauses_are_named(soft_phase, stiff_phase):
    report = check_admissibility(disk(8, 0.3, soft_phase, stiff_phase))
    assert not report.cond_eq3
    assert 'mu1_equals_minus_K2' in report.failures()
    assert report.to_json()['admissible'] is False


def test_disk_matrix_is_connected(canonical_phases):
    assert matrix_components(disk(16, 0.3, *canonical_phases).chi) == 1


def test_split_matrix_is_detected():
    chi = np.zeros((8, 8), dtype=np.uint8)
    chi[:, 0] = 1
    chi[:, 4] = 1
    assert matrix_components(chi) == 2
    assert matrix_components(np.ones((4, 4), dtype=np.uint8)) == 0


def test_laminate_matrix_wraps_periodically(canonical_phases):
    # matrix occupies rows 6, 7, 0, 1: connected only across the boundary
    m = shift(laminate(8, 0.5, 1, *canonical_phases), 2, 0)
    assert check_admissibility(m).matrix_components == 1


# =============================================================================
# Descriptors
# =============================================================================

def test_descriptor_builds_disk(canonical_phase_config):
    m = from_descriptor({'n': 16, 'generator': {'kind': 'disk', 'radius': 0.25}, **canonical_phase_config})
    assert m.n == 16
    assert m.phase2 == IsotropicModuli(lam=-4.0, mu=3.0)


def test_descriptor_raster_is_relative_to_base_dir(tmp_path, random_raster, canonical_phase_config):
    to_raster(random_raster, tmp_path / 'cell.pgm')
    m = from_descriptor({'generator': {'kind': 'raster', 'path': 'cell.pgm'}, **canonical_phase_config}, tmp_path)
    assert_array_equal(m.chi, random_raster.chi)


def test_descriptor_raster_size_mismatch(tmp_path, random_raster, canonical_phase_config):
    to_raster(random_raster, tmp_path / 'cell.pgm')
    with pytest.raises(RasterFormatError, match="n=16"):
        from_descriptor(
            {'n': 16, 'generator': {'kind': 'raster', 'path': 'cell.pgm'}, **canonical_phase_config}, tmp_path
        )


def test_descriptor_unknown_kind(canonical_phase_config):
    with pytest.raises(InvalidGeometryError, match="unknown generator"):
        from_descriptor({'n': 8, 'generator': {'kind': 'gyroid'}, **canonical_phase_config})


@pytest.mark.parametrize("generator", [
    {'kind': 'laminate', 'theta': 0.5},
    {'kind': 'disk', 'radius': 0.25},
    {'kind': 'homogeneous'},
])
def test_descriptor_without_resolution(canonical_phase_config, generator):
    with pytest.raises(InvalidGeometryError, match="needs a resolution n"):
        from_descriptor({'generator': generator, **canonical_phase_config})
