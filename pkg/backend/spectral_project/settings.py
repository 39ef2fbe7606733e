"""
Django settings for spectral_project project.

Generated by 'django-admin startproject' using Django 5.2, trimmed to what the
`spectral` management command and the test runner need: there is no database,
no URL routing and no served application.

For more information on this file, see
https://docs.djangoproject.com/en/5.2/topics/settings/
"""

import os
from pathlib import Path

from dotenv import load_dotenv

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

load_dotenv(BASE_DIR / ".env")

SECRET_KEY = os.getenv("DJANGO_SECRET_KEY", "spectral-local-only-not-a-secret")

DEBUG = os.getenv("DEBUG", "false").lower() == "true"

ALLOWED_HOSTS = []

# Application definition

INSTALLED_APPS = [
    "django.contrib.auth",
    "django.contrib.contenttypes",
    "rest_framework",
    "spectral_app",
]

DATABASES = {}

# Numerical configuration
# Every value may be overridden from the environment (or a .env file next to manage.py).

SPECTRAL_RELATIVE_TOLERANCE = float(os.getenv("SPECTRAL_RELATIVE_TOLERANCE", "1e-10"))
SPECTRAL_ABSOLUTE_TOLERANCE = float(os.getenv("SPECTRAL_ABSOLUTE_TOLERANCE", "1e-13"))
SPECTRAL_QUAD_LIMIT = int(os.getenv("SPECTRAL_QUAD_LIMIT", "400"))
SPECTRAL_P_MAX = int(os.getenv("SPECTRAL_P_MAX", "8"))
SPECTRAL_IFS_DEPTH = int(os.getenv("SPECTRAL_IFS_DEPTH", "24"))
SPECTRAL_LATTICE_TAIL = float(os.getenv("SPECTRAL_LATTICE_TAIL", "1e-12"))
SPECTRAL_LATTICE_MAX_TERMS = int(os.getenv("SPECTRAL_LATTICE_MAX_TERMS", "200000"))

SPECTRAL_DEFAULT_BINS = int(os.getenv("SPECTRAL_DEFAULT_BINS", "401"))
SPECTRAL_DEFAULT_UMAX = float(os.getenv("SPECTRAL_DEFAULT_UMAX", "200.5"))
SPECTRAL_DEFAULT_RULE = os.getenv("SPECTRAL_DEFAULT_RULE", "equal_width")
SPECTRAL_WORKERS = int(os.getenv("SPECTRAL_WORKERS", "1"))
SPECTRAL_MAX_PATHS_PER_SEED = int(os.getenv("SPECTRAL_MAX_PATHS_PER_SEED", str(2**32)))

SPECTRAL_OUTPUT_DIR = os.getenv("SPECTRAL_OUTPUT_DIR", str(BASE_DIR / "artifacts"))

REST_FRAMEWORK = {
    "DEFAULT_RENDERER_CLASSES": (
        "rest_framework.renderers.JSONRenderer",
    ),
    "UNAUTHENTICATED_USER": None,
}

LOGGING = {
    "version": 1,
    "disable_existing_loggers": False,
    "formatters": {
        "simple": {"format": "%(asctime)s %(levelname)s %(name)s: %(message)s"},
    },
    "handlers": {
        "console": {"class": "logging.StreamHandler", "formatter": "simple"},
    },
    "loggers": {
        "spectral": {
            "handlers": ["console"],
            "level": os.getenv("SPECTRAL_LOG_LEVEL", "WARNING"),
        },
        "spectral_app": {
            "handlers": ["console"],
            "level": os.getenv("SPECTRAL_LOG_LEVEL", "WARNING"),
        },
    },
}

# Internationalization
# https://docs.djangoproject.com/en/5.2/topics/i18n/

LANGUAGE_CODE = "en-us"

TIME_ZONE = "UTC"

USE_I18N = False

USE_TZ = True

DEFAULT_AUTO_FIELD = "django.db.models.BigAutoField"
