"""
Command-line helpers shared by the ``spectral`` management command.

``run(argv)`` executes the command in-process and returns its exit code:
0 on success, 2 on a configuration or validation error, 3 when a
verification suite fails and 1 for any other library error.
"""
import re
import sys

import numpy as np

from spectral.exceptions import ConfigError
from spectral.expressions import Expression

_IMPLICIT_PI = re.compile(r"(\d|\))\s*(pi)\b")


def parse_scalar(token):
    """A real number written with optional ``pi`` tokens: "2pi", "-pi/2", "3*pi/4", "1.5"."""
    text = _IMPLICIT_PI.sub(r"\1*\2", str(token).strip())
    expression = Expression(text, variable="t")
    if not expression.is_constant():
        raise ConfigError(f"{token!r} is not a constant")
    value = expression.constant_value()
    if isinstance(value, complex):
        raise ConfigError(f"{token!r} is not real")
    return float(value)


def parse_times(text):
    """START:END:COUNT as COUNT equally spaced times, both ends included."""
    parts = str(text).split(":")
    if len(parts) != 3:
        raise ConfigError(f"time grid {text!r} must read START:END:COUNT")
    start, end = parse_scalar(parts[0]), parse_scalar(parts[1])
    try:
        count = int(parts[2])
    except ValueError:
        raise ConfigError(f"time count {parts[2]!r} is not an integer") from None
    if count < 1:
        raise ConfigError("a time grid needs at least one point")
    return np.linspace(start, end, count)


def run(argv=None, stdout=None, stderr=None):
    """Run ``spectral`` with ``argv`` and return the exit code instead of exiting."""
    from .management.commands.spectral import Command

    argv = sys.argv[1:] if argv is None else list(argv)
    command = Command(stdout=stdout, stderr=stderr)
    try:
        command.run_from_argv(["manage.py", "spectral", *argv])
    except SystemExit as stop:
        return stop.code if isinstance(stop.code, int) else (0 if stop.code is None else 1)
    return 0
