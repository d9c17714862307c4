"""
Django settings for the cgns project.

Django hosts the management commands, the settings layer and the test
runner; there is no database and no URL routing.

For the full list of settings and their values, see
https://docs.djangoproject.com/en/5.0/ref/settings/
"""

from pathlib import Path
import os
from dotenv import load_dotenv


# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

load_dotenv(BASE_DIR / ".env")


def _env_flag(name, default):
    value = os.getenv(name)
    if value is None:
        return default
    return value.strip().lower() in ("1", "true", "yes", "on")


SECRET_KEY = os.getenv("CGNS_SECRET_KEY", "cgns-local-only-not-a-secret")

DEBUG = _env_flag("CGNS_DEBUG", False)

ALLOWED_HOSTS = []


# Application definition

INSTALLED_APPS = [
    # rest framework (serializers validate every JSON document)
    'rest_framework',
    # aplicacoes
    'adcore',
    'graphs',
    'nets',
    'solver',
    'sims',
    'data',
    'train',
    'evalcli',
]

DATABASES = {}

USE_TZ = True
TIME_ZONE = 'UTC'


# Logging

CGNS_LOG_LEVEL = os.getenv("CGNS_LOG_LEVEL", "INFO").upper()

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'verbose': {
            'format': '{asctime} {levelname} {name}: {message}',
            'style': '{',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'verbose',
        },
    },
    'loggers': {
        name: {
            'handlers': ['console'],
            'level': CGNS_LOG_LEVEL,
            'propagate': False,
        }
        for name in ('adcore', 'graphs', 'nets', 'solver', 'sims', 'data',
                     'train', 'evalcli')
    },
}


# Numerics

# finite-value assertions after every primitive (debug only)
CGNS_CHECK_FINITE = _env_flag("CGNS_CHECK_FINITE", DEBUG)

CGNS_WORKERS = int(os.getenv("CGNS_WORKERS", 1))

CGNS_EVAL_SEEDS = int(os.getenv("CGNS_EVAL_SEEDS", 3))

CGNS_PROFILE = os.getenv("CGNS_PROFILE", "desk")

SIMULATOR_PROFILES = {
    'desk': {
        'net': {
            'latent_size': 32,
            'mlp_hidden_layers': 2,
            'mlp_hidden_units': 128,
        },
        'optim': {
            'learning_rate': 1e-4,
            'decay_factor': 0.7,
            'decay_steps': [5_000, 10_000, 20_000, 40_000],
            'batch_size': 16,
            'total_steps': 50_000,
            'validate_every': 500,
        },
        'counts': {'train': 1000, 'val': 50, 'test': 50},
    },
    'paper': {
        'net': {
            'latent_size': 32,
            'mlp_hidden_layers': 3,
            'mlp_hidden_units': 256,
        },
        'optim': {
            'learning_rate': 1e-4,
            'decay_factor': 0.7,
            'decay_steps': [100_000, 200_000, 400_000, 800_000],
            'batch_size': 64,
            'total_steps': 1_000_000,
            'validate_every': 5_000,
        },
        'counts': {'train': 8000, 'val': 100, 'test': 100},
    },
}

DOMAIN_DEFAULTS = {
    'rope': {
        'connectivity': 'chain',
        'wall_clip': None,
        'use_radius': False,
        'num_message_passing': 2,
    },
    'bouncing_balls': {
        'connectivity': 'fully_connected',
        'wall_clip': 2.0,
        'use_radius': True,
        'num_message_passing': 1,
    },
}
