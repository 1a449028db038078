# homogenization/engine/config.py
"""
Solver defaults for the engine.

Values come from Django settings (populated from the environment by
django-environ) when Django is configured; standalone use of the engine
falls back to the built-in defaults below.
"""
import logging
from typing import Any, Dict

logger = logging.getLogger(__name__)

DEFAULTS: Dict[str, Any] = {
    'cg_tol': 1e-9,
    'cg_max_iter_factor': 10,
    'eig_tol': 1e-8,
    'eig_max_iter': 500,
    'eig_block': 4,
    'rank_one_grid': 360,
    'rank_one_refine_tol': 1e-10,
    'degeneracy_tol': 1e-7,
    'psd_tol': 1e-12,
    'workers': 1,
}

_SETTINGS_KEYS = {
    'cg_tol': 'HOMOG_CG_TOL',
    'cg_max_iter_factor': 'HOMOG_CG_MAX_ITER_FACTOR',
    'eig_tol': 'HOMOG_EIG_TOL',
    'eig_max_iter': 'HOMOG_EIG_MAX_ITER',
    'eig_block': 'HOMOG_EIG_BLOCK',
    'rank_one_grid': 'HOMOG_RANK_ONE_GRID',
    'rank_one_refine_tol': 'HOMOG_RANK_ONE_REFINE_TOL',
    'degeneracy_tol': 'HOMOG_DEGENERACY_TOL',
    'psd_tol': 'HOMOG_PSD_TOL',
    'workers': 'HOMOG_WORKERS',
}


def get_config() -> Dict[str, Any]:
    """Load engine defaults from Django settings at runtime."""
    try:
        from django.conf import settings
        return {
            key: getattr(settings, name, DEFAULTS[key])
            for key, name in _SETTINGS_KEYS.items()
        }
    except Exception:
        # Fallback for standalone usage
        return dict(DEFAULTS)


def get_setting(key: str) -> Any:
    """Single default by engine key."""
    return get_config()[key]
