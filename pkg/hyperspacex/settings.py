"""
Django settings for the hyperspacex project.

The project serves no HTTP traffic: Django provides the management commands,
the run ledger (ORM), the SVG template engine and the test runner.
"""

from pathlib import Path
import os

import dj_database_url
from dotenv import load_dotenv
load_dotenv()


# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

DEBUG = os.environ.get("DEBUG", "0") == "1"

# Nothing is signed or served; a fixed local key is enough when unset.
SECRET_KEY = os.environ.get("SECRET_KEY") or "hyperspacex-local-only"

ALLOWED_HOSTS = []


# Application definition

INSTALLED_APPS = [
    'django.contrib.contenttypes',
    'numkit',
    'geometry',
    'losses',
    'network',
    'optimizer',
    'dataio',
    'evaluation',
    'runs',
]

MIDDLEWARE = []

TEMPLATES = [
    {
        'BACKEND': 'django.template.backends.django.DjangoTemplates',
        'DIRS': [],
        'APP_DIRS': True,
        'OPTIONS': {
            'context_processors': [],
        },
    },
]


# Database (run ledger)

DATABASES = {
    "default": dj_database_url.config(
        default=f"sqlite:///{BASE_DIR / 'hyperspacex.sqlite3'}",
        conn_max_age=600,
    )
}


# Run outputs and evaluation cadence

OUTPUT_ROOT = Path(os.environ.get("HYPERSPACEX_OUTPUT_ROOT", BASE_DIR / "runs_out"))

MNIST_EVAL_EVERY = int(os.environ.get("HYPERSPACEX_MNIST_EVAL_EVERY", "5"))
SYNTH_EVAL_EVERY = int(os.environ.get("HYPERSPACEX_SYNTH_EVAL_EVERY", "1"))


# Logging

LOG_LEVEL = os.environ.get("HYPERSPACEX_LOG_LEVEL", "INFO").upper()

LOGGING = {
    "version": 1,
    "disable_existing_loggers": False,
    "formatters": {
        "plain": {
            "format": "%(asctime)s %(levelname)s %(name)s %(message)s",
        },
    },
    "handlers": {
        "console": {
            "class": "logging.StreamHandler",
            "formatter": "plain",
        },
    },
    "loggers": {
        app: {"handlers": ["console"], "level": LOG_LEVEL, "propagate": False}
        for app in INSTALLED_APPS[1:]
    },
}


# Internationalization

LANGUAGE_CODE = 'en-us'

TIME_ZONE = 'UTC'

USE_I18N = False

USE_TZ = True


# Default primary key field type

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'
