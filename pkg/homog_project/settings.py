# homog_project/settings.py
from pathlib import Path

from environ import Env
import dj_database_url

env = Env()
BASE_DIR = Path(__file__).resolve().parent.parent
Env.read_env(BASE_DIR / '.env')

ENVIRONMENT = env('ENVIRONMENT', default='development')
DEBUG = ENVIRONMENT == 'development'

# No HTTP surface; the key only satisfies Django's startup checks
SECRET_KEY = env('DJANGO_SECRET_KEY', default='homog-local-only')

ALLOWED_HOSTS = ['localhost', '127.0.0.1']

INSTALLED_APPS = [
    'django.contrib.contenttypes',

    # Local apps
    'homogenization.apps.HomogenizationConfig',
]

# Run records (--record); sqlite next to the project unless DATABASE_URL is set
DATABASES = {
    'default': dj_database_url.parse(
        env('DATABASE_URL', default=f"sqlite:///{BASE_DIR / 'homog.sqlite3'}")
    )
}

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'

LANGUAGE_CODE = 'en-us'
TIME_ZONE = 'UTC'
USE_I18N = False
USE_TZ = True

# Solver defaults (engine.config reads these)
HOMOG_CG_TOL = env.float('HOMOG_CG_TOL', default=1e-9)
# CG iteration budget is this factor times the resolution n
HOMOG_CG_MAX_ITER_FACTOR = env.int('HOMOG_CG_MAX_ITER_FACTOR', default=10)
HOMOG_EIG_TOL = env.float('HOMOG_EIG_TOL', default=1e-8)
HOMOG_EIG_MAX_ITER = env.int('HOMOG_EIG_MAX_ITER', default=500)
HOMOG_EIG_BLOCK = env.int('HOMOG_EIG_BLOCK', default=4)
HOMOG_RANK_ONE_GRID = env.int('HOMOG_RANK_ONE_GRID', default=360)
HOMOG_RANK_ONE_REFINE_TOL = env.float('HOMOG_RANK_ONE_REFINE_TOL', default=1e-10)
HOMOG_DEGENERACY_TOL = env.float('HOMOG_DEGENERACY_TOL', default=1e-7)
HOMOG_PSD_TOL = env.float('HOMOG_PSD_TOL', default=1e-12)
HOMOG_WORKERS = env.int('HOMOG_WORKERS', default=1)

LOG_LEVEL = env('LOG_LEVEL', default='INFO')

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'plain': {'format': '%(asctime)s %(levelname)s %(name)s: %(message)s'},
    },
    'handlers': {
        # stderr keeps stdout free for reports written with --out -
        'console': {'class': 'logging.StreamHandler', 'formatter': 'plain'},
    },
    'loggers': {
        'homogenization': {'handlers': ['console'], 'level': LOG_LEVEL, 'propagate': False},
    },
}
