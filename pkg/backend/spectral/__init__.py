"""Spectral measures, their quadratic forms and the Gaussian processes they drive."""

__version__ = "0.1.0"
