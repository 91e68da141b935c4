"""
WSGI config for the matsense project; serves the admin over recorded runs.
"""

import os

from django.core.wsgi import get_wsgi_application

os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'matsense.settings')

application = get_wsgi_application()
