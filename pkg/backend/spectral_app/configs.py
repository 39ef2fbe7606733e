"""Loading JSON configuration files into measures, test functions and sigma-functions."""
import json
import logging
from pathlib import Path

from rest_framework import serializers

from spectral.exceptions import ConfigError

from .serializers import RunConfigSerializer, SigmaFunctionSerializer, build_measure, build_test_function

logger = logging.getLogger(__name__)


def read_json(path):
    """Parse a UTF-8 JSON file; syntax errors carry their line and column."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: {exc.msg}", line=exc.lineno, column=exc.colno, source=str(path)) from exc


def _flatten(detail, prefix=""):
    if isinstance(detail, dict):
        for key, value in detail.items():
            yield from _flatten(value, f"{prefix}{key}.")
    elif isinstance(detail, list):
        for item in detail:
            yield from _flatten(item, prefix)
    else:
        yield f"{prefix.rstrip('.') or 'config'}: {detail}"


def validation_message(exc):
    return "; ".join(_flatten(exc.detail))


def _build(path, builder):
    data = read_json(path)
    try:
        built = builder(data)
    except serializers.ValidationError as exc:
        raise ConfigError(f"{path}: {validation_message(exc)}", source=str(path)) from exc
    logger.debug(f"loaded {path}")
    return built


def load_measure(path):
    return _build(path, build_measure)


def load_test_function(path):
    return _build(path, build_test_function)


def load_sigma_function(path):
    def builder(data):
        serializer = SigmaFunctionSerializer(data=data)
        serializer.is_valid(raise_exception=True)
        return serializer.save()

    return _build(path, builder)


def load_run_config(path):
    """Validate a sidecar written by a previous run and return its validated fields."""

    def builder(data):
        serializer = RunConfigSerializer(data=data)
        serializer.is_valid(raise_exception=True)
        return serializer.validated_data

    return _build(path, builder)
