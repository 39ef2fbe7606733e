"""
Artifact writers: CSV through pandas with 17 significant digits, JSON
reports and sidecars with sorted keys so reruns are byte-identical.
"""
import json
import logging
from pathlib import Path

import numpy as np
import pandas as pd

from spectral import __version__
from spectral.gproc import PathEnsemble

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"


def format_float(x):
    return FLOAT_FORMAT % x


def _default(value):
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, complex):
        return [value.real, value.imag]
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"{type(value).__name__} is not JSON serializable")


def dumps(payload):
    return json.dumps(payload, indent=2, sort_keys=True, default=_default) + "\n"


def write_json(payload, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(payload), encoding="utf-8")
    logger.info(f"wrote {path}")
    return path


def write_frame(frame, path, index=False):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=index, float_format=FLOAT_FORMAT, lineterminator="\n")
    logger.info(f"wrote {path}")
    return path


def write_ensemble(ensemble, directory, name="paths"):
    """``name``.csv (header: times, one row per path) and the ``name``.json sidecar."""
    directory = Path(directory)
    frame = pd.DataFrame(ensemble.values, columns=[format_float(t) for t in ensemble.times])
    csv_path = write_frame(frame, directory / f"{name}.csv")
    json_path = write_json({**ensemble.metadata(), "version": __version__}, directory / f"{name}.json")
    return csv_path, json_path


def read_ensemble(csv_path):
    """Reload an ensemble written by :func:`write_ensemble`; the sidecar supplies seed and method when present."""
    csv_path = Path(csv_path)
    # the header row holds the times; read it as data so repeated times keep their values
    frame = pd.read_csv(csv_path, header=None, float_precision="round_trip")
    times = frame.iloc[0].to_numpy(dtype=float)
    values = frame.iloc[1:].to_numpy(dtype=float)
    sidecar = csv_path.with_suffix(".json")
    meta = json.loads(sidecar.read_text(encoding="utf-8")) if sidecar.exists() else {}
    return PathEnsemble(times, values, int(meta.get("seed", 0)), None,
                        meta.get("method", "spectral_synthesis"), meta.get("measure", {}))


def write_matrix(matrix, labels, path):
    names = [format_float(x) for x in labels]
    return write_frame(pd.DataFrame(np.asarray(matrix), index=names, columns=names), path, index=True)


def write_table(rows, path):
    return write_frame(pd.DataFrame(rows), path)
