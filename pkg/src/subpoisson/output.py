"""Flat-file emitters: CSV with a provenance header, JSON summaries, rate tables."""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from . import __version__
from .dynamics import LossRateTable, params_provenance
from .errors import ConfigError

FLOAT_FORMAT = "{:.9g}"


def header_line(config_sha):
    return f"# subpoisson {__version__} config_sha256={config_sha}"


def _cell(value):
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return "nan" if math.isnan(value) else FLOAT_FORMAT.format(value)
    return str(value)


def write_csv(path, columns, rows, config_sha):
    """Write rows under a provenance comment line; floats get 9 significant digits."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        fh.write(header_line(config_sha) + "\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_cell(v) for v in row])
    return path


def read_csv(path):
    """Read a CSV written by :func:`write_csv`; returns ``(columns, rows)`` of strings."""
    with Path(path).open() as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    reader = csv.reader(lines)
    columns = next(reader)
    return columns, list(reader)


def write_json(path, doc):
    path = Path(path)
    path.write_text(json.dumps(doc, indent=2, sort_keys=True, allow_nan=False) + "\n")
    return path


def save_rate_table(table, path):
    """Store a rate table as JSON; floats are written with round-trip precision."""
    doc = table.sidecar()
    # angular grid and rates in 1/s, exact so the content hash survives
    doc["delta_l_grid_rad_s"] = table.delta_l_grid.tolist()
    doc["rates"] = table.rates.tolist()
    return write_json(path, doc)


def load_rate_table(path, params=None):
    """Load a table saved by :func:`save_rate_table`.

    When ``params`` is given, the stored parameter hash must match.
    """
    try:
        doc = json.loads(Path(path).read_text())
        grid = np.array(doc["delta_l_grid_rad_s"])
        table = LossRateTable(doc["n_target"], grid, np.array(doc["rates"]))
    except (OSError, KeyError, ValueError) as exc:
        raise ConfigError(f"cannot read rate table {path}: {exc}") from None
    stored = doc.get("params", {}).get("sha256")
    if params is not None and stored != params_provenance(params)["sha256"]:
        raise ConfigError(f"rate table {path} was built for different physical parameters")
    table.metadata = {k: doc[k] for k in ("params", "solver") if k in doc}
    if table.content_hash() != doc.get("content_sha256"):
        raise ConfigError(f"rate table {path} fails its content hash")
    return table
