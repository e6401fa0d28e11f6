"""
Django settings for the bpgs project.

The project has no database and no web surface: Django provides the
management commands, the settings layer, logging configuration and the
test runner.

For the full list of settings and their values, see
https://docs.djangoproject.com/en/5.1/ref/settings/
"""

import os
from pathlib import Path

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

# Never used for signing anything; Django only insists that it is set.
SECRET_KEY = os.getenv("SECRET_KEY", "bpgs-local-not-secret")

DEBUG = os.getenv("DEBUG", "False") == "True"

INSTALLED_APPS = [
    "bpgs.groundstates",
]

DATABASES: dict[str, dict[str, str]] = {}

USE_TZ = True
TIME_ZONE = "UTC"


# Output and numerical defaults

BPGS_OUT_DIR = Path(os.getenv("BPGS_OUT_DIR", str(BASE_DIR / "out")))

# Flat dotted keys, the same keys a `--config` file may set.
BPGS_DEFAULTS: dict[str, str] = {
    "p": "4",
    "beta": "0",
    "betas": "1,0.5,0.25,0.1,0.05,0.025",
    "grid.r_max": "40",
    "grid.n": "4096",
    "solver.step0": "1e-3",
    "solver.tol_el": "1e-8",
    "solver.tol_np": "1e-10",
    "solver.max_iters": "20000",
    "solver.phase_a_iters": "2000",
    "solver.init_file": "",
    "seed": "0",
    "warm_start": "true",
    "workers": "1",
    "format": "csv,json,solution-text,plot-data",
}


# Logging
# https://docs.djangoproject.com/en/5.1/topics/logging/

BPGS_LOG_LEVEL = os.getenv("BPGS_LOG_LEVEL", "INFO").upper()
assert BPGS_LOG_LEVEL in (
    "DEBUG",
    "INFO",
    "WARNING",
    "ERROR",
), "BPGS_LOG_LEVEL must be one of DEBUG, INFO, WARNING, ERROR"

LOGGING = {
    "version": 1,
    "disable_existing_loggers": False,
    "formatters": {
        "plain": {
            "format": "{asctime} {levelname} {name}: {message}",
            "style": "{",
        },
    },
    "handlers": {
        "console": {
            "class": "logging.StreamHandler",
            "formatter": "plain",
        },
    },
    "loggers": {
        "bpgs": {
            "handlers": ["console"],
            "level": BPGS_LOG_LEVEL,
            "propagate": False,
        },
    },
}
