r"""
Django settings for the softdeep project.

Project structure:
    softdeep-bm/
    ├── .env
    ├── manage.py
    ├── boltzmann/          <- the app (library + management commands)
    └── softdeep/
        └── settings.py     <- this file

There is no HTTP surface; Django is used for configuration, logging and
the management-command CLI.  Every BM_* value below can be overridden in
.env or the process environment.
"""
import os
from pathlib import Path
from dotenv import load_dotenv

BASE_DIR = Path(__file__).resolve().parent.parent

load_dotenv(BASE_DIR / '.env', override=False)

# ============================================
# CORE
# ============================================
SECRET_KEY = os.getenv('DJANGO_SECRET_KEY', 'softdeep-local-only-not-a-secret')
DEBUG      = os.getenv('DJANGO_DEBUG', 'false').strip().lower() == 'true'
ALLOWED_HOSTS: list[str] = []

# ============================================
# INSTALLED APPS
# ============================================
INSTALLED_APPS = [
    'django.contrib.contenttypes',
    'rest_framework',
    'boltzmann',
]

# No models live in this project; the test runner only needs a throwaway
# database definition to exist.
DATABASES = {
    'default': {
        'ENGINE': 'django.db.backends.sqlite3',
        'NAME':   BASE_DIR / 'softdeep.sqlite3',
    },
}

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'

USE_TZ    = True
TIME_ZONE = 'UTC'

# ============================================
# BOLTZMANN LIBRARY
# ============================================
BM_ENUMERATION_CAP   = int(os.getenv('BM_ENUMERATION_CAP', '25'))
BM_EXACT_EVAL_CAP    = int(os.getenv('BM_EXACT_EVAL_CAP', str(2 ** 25)))
BM_ENUMERATION_CHUNK = int(os.getenv('BM_ENUMERATION_CHUNK', str(2 ** 14)))
BM_LP_CAP            = int(os.getenv('BM_LP_CAP', '4096'))
BM_LP_MARGIN         = float(os.getenv('BM_LP_MARGIN', '1e-9'))
BM_THREADS           = int(os.getenv('BM_THREADS', '1'))
BM_OUTPUT_DIR        = Path(os.getenv('BM_OUTPUT_DIR', str(BASE_DIR / 'runs')))
BM_DATA_DIR          = Path(os.getenv('BM_DATA_DIR', str(BASE_DIR / 'data')))
BM_LOG_LEVEL         = os.getenv('BM_LOG_LEVEL', 'INFO').strip().upper()

# ============================================
# LOGGING: stderr only, stdout is command output
# ============================================
LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'plain': {
            'format': '%(asctime)s %(levelname)-7s %(name)s %(message)s',
        },
    },
    'handlers': {
        'console': {
            'class':     'logging.StreamHandler',
            'stream':    'ext://sys.stderr',
            'formatter': 'plain',
        },
    },
    'loggers': {
        'boltzmann': {
            'handlers':  ['console'],
            'level':     BM_LOG_LEVEL,
            'propagate': False,
        },
    },
}
