"""
Django settings for the Remote POVM Lab.
"""
import os
from pathlib import Path
import environ

from remote_povm.conf import TOLERANCE_DEFAULTS

# Build paths inside the project
BASE_DIR = Path(__file__).resolve().parent.parent

# Initialize environment variables
env = environ.Env(
    DEBUG=(bool, False),
    POVM_DEFAULT_SEED=(int, 20020313),
    POVM_DEFAULT_SHOTS=(int, 100000),
    POVM_CAPABILITY_TRIALS=(int, 1000),
    POVM_MAX_QUBITS=(int, 3),
    POVM_MAX_SIMULATION_QUBITS=(int, 2),
    POVM_LOG_LEVEL=(str, 'WARNING'),
)

# Read .env file
environ.Env.read_env(os.path.join(BASE_DIR, '.env'))

SECRET_KEY = env('SECRET_KEY', default='remote-povm-lab-local-key')
DEBUG = env('DEBUG')
ALLOWED_HOSTS = []

# Application definition
INSTALLED_APPS = [
    'remote_povm',
]

# The lab has no persistent tables; reports are files.
DATABASES = {}

LANGUAGE_CODE = 'en-us'
TIME_ZONE = 'UTC'
USE_I18N = False
USE_TZ = True

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'

# Numerical tolerances (one record, overridable per key via POVM_TOL_<KEY>)
POVM_TOLERANCES = {
    key: env.float(f'POVM_TOL_{key.upper()}', default=value)
    for key, value in TOLERANCE_DEFAULTS.items()
}

# Simulation Settings
POVM_DEFAULT_SEED = env('POVM_DEFAULT_SEED')
POVM_DEFAULT_SHOTS = env('POVM_DEFAULT_SHOTS')
POVM_CAPABILITY_TRIALS = env('POVM_CAPABILITY_TRIALS')
POVM_MAX_QUBITS = env('POVM_MAX_QUBITS')
POVM_MAX_SIMULATION_QUBITS = env('POVM_MAX_SIMULATION_QUBITS')

# Logging goes to stderr; stdout is reserved for reports
LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'simple': {
            'format': '{levelname} {name}: {message}',
            'style': '{',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'stream': 'ext://sys.stderr',
            'formatter': 'simple',
        },
    },
    'loggers': {
        'remote_povm': {
            'handlers': ['console'],
            'level': env('POVM_LOG_LEVEL'),
            'propagate': False,
        },
    },
}
