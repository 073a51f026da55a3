"""
Django settings for onsager_lab project.

The project has no web surface: it hosts the numerical apps of the lab and the
batch management commands that drive them. Everything that varies between
machines is read from the environment; numerical defaults live in ``LAB``.

For more information on this file, see
https://docs.djangoproject.com/en/5.2/topics/settings/
"""

import math
import os
from pathlib import Path

import dj_database_url


# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

# SECURITY WARNING: keep the secret key used in production secret!
SECRET_KEY = os.environ.get('SECRET_KEY', 'onsager-lab-batch-only-not-a-secret')

DEBUG = os.environ.get('DEBUG', 'False').lower() == 'true'

ALLOWED_HOSTS = []

# Application definition

INSTALLED_APPS = [
    "django.contrib.contenttypes",
    "params",
    "fields",
    "mikado",
    "divsolve",
    "flux",
    "lab",
]

MIDDLEWARE = []


# Database
# https://docs.djangoproject.com/en/5.2/ref/settings/#databases

# Use DATABASE_URL when provided, otherwise keep run manifests in a local SQLite file
if os.environ.get('DATABASE_URL'):
    DATABASES = {
        'default': dj_database_url.parse(os.environ.get('DATABASE_URL'))
    }
else:
    DATABASES = {
        'default': {
            'ENGINE': 'django.db.backends.sqlite3',
            'NAME': BASE_DIR / 'db.sqlite3',
        }
    }


# Internationalization
# https://docs.djangoproject.com/en/5.2/topics/i18n/

LANGUAGE_CODE = "en-us"

TIME_ZONE = "UTC"

USE_I18N = False

USE_TZ = True

# Default primary key field type
# https://docs.djangoproject.com/en/5.2/ref/settings/#default-auto-field

DEFAULT_AUTO_FIELD = "django.db.models.BigAutoField"


# Logging
# https://docs.djangoproject.com/en/5.2/topics/logging/

LAB_LOG_LEVEL = os.environ.get('LAB_LOG_LEVEL', 'INFO').upper()

LOGGING = {
    "version": 1,
    "disable_existing_loggers": False,
    "formatters": {
        "verbose": {
            "format": "{levelname} {asctime} {name} {message}",
            "style": "{",
        },
    },
    "handlers": {
        "console": {
            "class": "logging.StreamHandler",
            "formatter": "verbose",
        },
    },
    "root": {
        "handlers": ["console"],
        "level": "WARNING",
    },
    "loggers": {
        app: {"handlers": ["console"], "level": LAB_LOG_LEVEL, "propagate": False}
        for app in ("params", "fields", "mikado", "divsolve", "flux", "lab")
    },
}


# Numerical defaults shared by the lab apps. Run configs override the
# per-run values; tests override the rest with override_settings.
LAB = {
    'OUTPUT_DIR': Path(os.environ.get('LAB_OUTPUT_DIR', BASE_DIR / 'runs')),
    'SEED': int(os.environ.get('LAB_SEED', '0')),
    # params
    'C_HAT': math.e,
    'C_L': 1.0,
    'C0_SUM_LIMIT': 5.0,
    'BISECTION_STEPS': 60,
    # fields
    'MEAN_TOLERANCE': 1e-10,
    'KERNEL_QUADRATURE_NODES': 160,
    # mikado
    'B0_BUDGET': 0.25,
    'B_LAMBDA': 2.0,
    'C_V': 1.0,
    'TUBE_SEPARATION_FACTOR': 6.0,
    'PROFILE_MIN_POINTS': 8,
    'PROFILE_GRID': 96,
    'CFL_LIMIT': 0.5,
    'AMPLITUDE_TRACE': 1.0,
    'CANCELLATION_TOLERANCE': 1e-9,
    'DET_RANGE': (0.5, 2.0),
    # divsolve
    'MODE_TRUNCATION': 1e-14,
    'MAX_PARAMETRIX_ORDER': 4,
    'LEAK_TOLERANCE': 1e-13,
    # flux
    'FLUX_R': 4.0,
    'BESOV_MAGNITUDES': 16,
    'BESOV_DIRECTIONS': 13,
    'FLUX_TOLERANCE': 1e-8,
    'FLUX_CONVERGENCE': 0.05,
    'FLUX_EPS': (0.08, 0.04, 0.02, 0.01),
}
