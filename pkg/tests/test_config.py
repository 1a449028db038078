"""Run-configuration validation and command-line overrides."""
import pytest

from homogenization.config import (
    CoercivityConfig,
    ConfigError,
    EllipticityConfig,
    HomogenizeConfig,
    LaminateConfig,
    SweepConfig,
    apply_overrides,
    dump_config,
    load_run_config,
    parse_value,
    scalar_fields,
)


@pytest.fixture
def disk_run(canonical_phase_config):
    return {
        'microstructure': {
            'n': 16,
            'generator': {'kind': 'disk', 'radius': 0.25},
            **canonical_phase_config,
        },
    }


# =============================================================================
# Validation
# =============================================================================

def test_valid_homogenize_config(write_config, disk_run):
    config = load_run_config('homogenize', write_config(disk_run))
    assert isinstance(config, HomogenizeConfig)
    assert config.microstructure.n == 16
    assert config.microstructure.phase2.to_moduli().lam == -4.0
    assert config.solver.tol is None
    assert config.strict is False


def test_unknown_key_is_rejected(write_config, disk_run):
    disk_run['microstructure']['generator']['radus'] = 0.3
    with pytest.raises(ConfigError, match="radus"):
        load_run_config('homogenize', write_config(disk_run))


@pytest.mark.parametrize("n", [12, 1, 0])
def test_resolution_must_be_power_of_two(write_config, disk_run, n):
    disk_run['microstructure']['n'] = n
    with pytest.raises(ConfigError, match="power of two"):
        load_run_config('homogenize', write_config(disk_run))


def test_resolution_optional_only_for_rasters(write_config, disk_run):
    del disk_run['microstructure']['n']
    with pytest.raises(ConfigError, match="'n' is required"):
        load_run_config('homogenize', write_config(disk_run))
    disk_run['microstructure']['generator'] = {'kind': 'raster', 'path': 'cell.pgm'}
    config = load_run_config('homogenize', write_config(disk_run))
    assert config.microstructure.n is None


def test_disk_radius_range(write_config, disk_run):
    disk_run['microstructure']['generator']['radius'] = 0.5
    with pytest.raises(ConfigError, match="radius"):
        load_run_config('homogenize', write_config(disk_run))


def test_coercivity_k_grid_lower_bound(write_config, disk_run):
    with pytest.raises(ConfigError, match="k_grid"):
        load_run_config('coercivity', write_config({**disk_run, 'k_grid': 1}))
    config = load_run_config('coercivity', write_config({**disk_run, 'k_grid': 4, 'method': 'lobpcg'}))
    assert isinstance(config, CoercivityConfig)
    assert config.k_grid == 4


def test_ellipticity_needs_exactly_one_source():
    with pytest.raises(ValueError, match="exactly one"):
        EllipticityConfig()
    with pytest.raises(ValueError, match="exactly one"):
        EllipticityConfig(mandel=[[1, 0, 0], [0, 1, 0], [0, 0, 1]], moduli={'lambda': 0.0, 'mu': 1.0})
    with pytest.raises(ValueError, match="3x3"):
        EllipticityConfig(mandel=[[1, 0], [0, 1]])
    assert EllipticityConfig(moduli={'lambda': 0.0, 'mu': 1.0}).moduli.mu == 1.0


def test_laminate_normal_must_be_unit(canonical_phase_config):
    with pytest.raises(ValueError, match="unit vector"):
        LaminateConfig(normal=(1.0, 1.0), **canonical_phase_config)
    assert LaminateConfig(normal=(0.6, 0.8), **canonical_phase_config).route == 'traction'


def test_sweep_values():
    assert SweepConfig(start=0.0, stop=1.0, count=5).values() == [0.0, 0.25, 0.5, 0.75, 1.0]
    assert SweepConfig(start=0.3, stop=0.9, count=1).values() == [0.3]


# =============================================================================
# Loading
# =============================================================================

def test_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_run_config('decompose', tmp_path / 'absent.json')


def test_invalid_json(tmp_path):
    path = tmp_path / 'broken.json'
    path.write_text('{"phase1": ', encoding='utf-8')
    with pytest.raises(ConfigError, match="not valid JSON"):
        load_run_config('decompose', path)


def test_top_level_must_be_object(write_config):
    with pytest.raises(ConfigError, match="JSON object"):
        load_run_config('decompose', write_config([1, 2, 3]))


def test_dump_uses_lambda_alias(write_config, canonical_phase_config):
    config = load_run_config('decompose', write_config(canonical_phase_config))
    data = dump_config(config)
    assert data['phase1'] == {'lambda': 0.0, 'mu': 1.0}
    assert data['identity_samples'] == 1000


# =============================================================================
# Overrides
# =============================================================================

def test_overrides_set_dotted_keys(write_config, disk_run):
    config = load_run_config(
        'homogenize', write_config(disk_run), {'solver.tol': 1e-11, 'microstructure.n': 32},
    )
    assert config.solver.tol == 1e-11
    assert config.microstructure.n == 32


def test_overrides_do_not_mutate_input():
    data = {'solver': {'tol': 1e-9}}
    result = apply_overrides(data, {'solver.tol': 1e-6, 'strict': True})
    assert data == {'solver': {'tol': 1e-9}}
    assert result == {'solver': {'tol': 1e-6}, 'strict': True}


def test_override_through_scalar_fails():
    with pytest.raises(ConfigError, match="not an object"):
        apply_overrides({'out': 'report.json'}, {'out.path': 'x'})


@pytest.mark.parametrize("text, expected", [
    ('1e-9', 1e-9),
    ('16', 16),
    ('true', True),
    ('[1, 0]', [1, 0]),
    ('lobpcg', 'lobpcg'),
])
def test_parse_value(text, expected):
    assert parse_value(text) == expected


def test_scalar_fields():
    fields = scalar_fields(CoercivityConfig)
    assert {'out', 'strict', 'resolution', 'eig_tol', 'k_grid', 'reduce_wedge', 'method', 'csv'} <= set(fields)
    assert 'microstructure' not in fields
    assert 'solver' not in scalar_fields(HomogenizeConfig)
