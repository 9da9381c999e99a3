import os
from pathlib import Path

from dotenv import load_dotenv

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

# .env overrides are loaded before any AFC_* lookup
load_dotenv(BASE_DIR / ".env")


def _env_bool(name, default=False):
    value = os.getenv(name)
    if value is None:
        return default
    return value.strip().lower() in ("1", "true", "yes", "on")


SECRET_KEY = os.getenv("AFC_SECRET_KEY", "afc-memory-simulator-local-key")

DEBUG = _env_bool("AFC_DEBUG", False)

ALLOWED_HOSTS = []

# Application definition
INSTALLED_APPS = [
    "django.contrib.contenttypes",
    "django.contrib.auth",
    # Third party apps
    "rest_framework",
    # Local apps
    "core",
    "comb_model",
    "pulse_kit",
    "bloch_prop",
    "memory_sim",
    "scenario_cli",
]

# Results are flat CSV files; nothing is persisted in a database.
DATABASES = {}

# Internationalization
LANGUAGE_CODE = "en-us"
TIME_ZONE = "UTC"
USE_I18N = False
USE_TZ = True

DEFAULT_AUTO_FIELD = "django.db.models.BigAutoField"

# Command-line defaults. Flags win over these, these win over scenario files.
AFC_ENV_PREFIX = "AFC_"
AFC_SCENARIO = os.getenv("AFC_SCENARIO", "pr_fig2")
AFC_OUT = os.getenv("AFC_OUT", str(BASE_DIR / "results"))
AFC_TOL = float(os.getenv("AFC_TOL", "1e-9"))
AFC_NO_DECIMATION = _env_bool("AFC_NO_DECIMATION", False)
AFC_THREADS = int(os.getenv("AFC_THREADS", "1"))
AFC_LOG_LEVEL = os.getenv("AFC_LOG_LEVEL", "INFO")

# Canned scenarios ship as data files
AFC_SCENARIO_DIR = BASE_DIR / "scenario_cli" / "scenarios"

# Numerical defaults shared by the simulation apps
AFC_SIMULATION = {
    # integrator
    "TOLERANCE": AFC_TOL,
    "MAX_STEP_FRACTION": 1.0 / 50.0,  # of tau_c
    "DETUNING_BATCH_SIZE": 32,
    # transfer profile decimation
    "DECIMATION_THRESHOLD": 2048,
    "DECIMATION_STRIDE": 4,
    "DECIMATION_ENABLED": not AFC_NO_DECIMATION,
    # pulses
    "GATE_FACTOR": 7.0,  # T_cut / tau_c
    "MIN_CHIRP_PRODUCT": 2.0,  # Delta_max * tau_c
    # signal train
    "SIGMA_FRACTION": 1.0 / 6.0,  # sigma_t / tau_mode
    "MODE_CORE_SIGMAS": 2.0,  # half width of a mode for timeline checks
    "ECHO_WINDOW_HALF_WIDTH": 1.0,  # in units of tau_mode
    "OVERLAP_DELAY_REFINEMENT": 0.25,  # +/- fraction of tau_mode
    # spectral grids
    "RESOLUTION_FRACTION": 1.0 / 8.0,  # max spacing / gamma
    "SPAN_FACTOR": 4.0,  # auto grid span / Gamma
    "PEAK_TRUNCATION_WIDTHS": 6.0,  # peaks evaluated within +/- 6 gamma
    "SUPPORT_MARGIN_SPACINGS": 1.0,  # transfer profile beyond comb edge
    "THREADS": AFC_THREADS,
}

# Logging
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
        app: {
            "handlers": ["console"],
            "level": AFC_LOG_LEVEL,
            "propagate": False,
        }
        for app in ("core", "comb_model", "pulse_kit", "bloch_prop", "memory_sim", "scenario_cli")
    },
}
