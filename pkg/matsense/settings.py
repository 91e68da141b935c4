"""
Django settings for the matsense project.
"""

from pathlib import Path
import os
from dotenv import load_dotenv

# Load environment variables
load_dotenv()

BASE_DIR = Path(__file__).resolve().parent.parent

# SECURITY WARNING: keep the secret key used in production secret!
SECRET_KEY = os.getenv('SECRET_KEY', 'django-insecure-matsense-local-key-change-me')

DEBUG = os.getenv('DEBUG', 'False') == 'True'

ALLOWED_HOSTS = os.getenv('ALLOWED_HOSTS', 'localhost,127.0.0.1').split(',')


# Application definition

INSTALLED_APPS = [
    'django.contrib.admin',
    'django.contrib.auth',
    'django.contrib.contenttypes',
    'django.contrib.sessions',
    'django.contrib.messages',
    'django.contrib.staticfiles',

    # Local apps
    'recovery',
]

MIDDLEWARE = [
    'django.middleware.security.SecurityMiddleware',
    'django.contrib.sessions.middleware.SessionMiddleware',
    'django.middleware.common.CommonMiddleware',
    'django.middleware.csrf.CsrfViewMiddleware',
    'django.contrib.auth.middleware.AuthenticationMiddleware',
    'django.contrib.messages.middleware.MessageMiddleware',
    'django.middleware.clickjacking.XFrameOptionsMiddleware',
]

ROOT_URLCONF = 'matsense.urls'

TEMPLATES = [
    {
        'BACKEND': 'django.template.backends.django.DjangoTemplates',
        'DIRS': [],
        'APP_DIRS': True,
        'OPTIONS': {
            'context_processors': [
                'django.template.context_processors.debug',
                'django.template.context_processors.request',
                'django.contrib.auth.context_processors.auth',
                'django.contrib.messages.context_processors.messages',
            ],
        },
    },
]

WSGI_APPLICATION = 'matsense.wsgi.application'


# Database: experiment runs recorded with `experiment --record`

DATABASES = {
    'default': {
        'ENGINE': 'django.db.backends.sqlite3',
        'NAME': os.getenv('MATSENSE_DATABASE', str(BASE_DIR / 'db.sqlite3')),
    }
}


LANGUAGE_CODE = 'en-gb'

TIME_ZONE = 'Europe/London'

USE_I18N = True

USE_TZ = True

STATIC_URL = '/static/'
STATIC_ROOT = BASE_DIR / 'staticfiles'

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'

# Matrix sensing defaults
MATSENSE_SEED = int(os.getenv('MATSENSE_SEED', '0'))  # master seed when --seed is not given
MATSENSE_THREADS = int(os.getenv('MATSENSE_THREADS', '1'))
MATSENSE_OUTPUT_DIR = os.getenv('MATSENSE_OUTPUT_DIR', 'results')
MATSENSE_ETA_SCALE = float(os.getenv('MATSENSE_ETA_SCALE', '0.1'))  # eta = scale / sigma1 of the initial iterate
MATSENSE_TAU = float(os.getenv('MATSENSE_TAU', '0.5'))  # initialization step size
MATSENSE_LOG_LEVEL = os.getenv('MATSENSE_LOG_LEVEL', 'INFO')
MATSENSE_LOG_FILE = os.getenv('MATSENSE_LOG_FILE')

# Logging
LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'simple': {
            'format': '{asctime} {levelname} {name}: {message}',
            'style': '{',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'simple',
        },
    },
    'loggers': {
        'django': {
            'handlers': ['console'],
            'level': 'WARNING',
            'propagate': False,
        },
        'recovery': {
            'handlers': ['console'],
            'level': MATSENSE_LOG_LEVEL,
            'propagate': False,
        },
    },
}

if MATSENSE_LOG_FILE:
    LOGGING['handlers']['file'] = {
        'level': MATSENSE_LOG_LEVEL,
        'class': 'logging.FileHandler',
        'filename': MATSENSE_LOG_FILE,
        'formatter': 'simple',
    }
    LOGGING['loggers']['recovery']['handlers'].append('file')
