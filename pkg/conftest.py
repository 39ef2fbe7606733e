import os

import django

os.environ.setdefault("DJANGO_SETTINGS_MODULE", "spectral_project.settings")
django.setup()
