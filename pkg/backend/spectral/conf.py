import logging

from django.conf import settings
from django.core.exceptions import ImproperlyConfigured

logger = logging.getLogger(__name__)


def setting(name, default):
    """Read a SPECTRAL_* value from Django settings, or fall back to ``default``."""
    try:
        return getattr(settings, name, default)
    except ImproperlyConfigured:
        return default


def relative_tolerance():
    return setting("SPECTRAL_RELATIVE_TOLERANCE", 1e-10)


def quad_limit():
    return setting("SPECTRAL_QUAD_LIMIT", 400)


def absolute_tolerance():
    return setting("SPECTRAL_ABSOLUTE_TOLERANCE", 1e-13)
