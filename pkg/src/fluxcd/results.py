"""Tabular results: one CSV plus a JSON metadata sidecar per command."""

from __future__ import annotations

import csv
import json
import math
import os
import platform
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


@dataclass
class ResultRecord:
    command: str
    config_hash: str
    columns: list[str]
    rows: list[dict] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)


def _cell(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return "nan" if math.isnan(value) else repr(value)
    return str(value)


def flatten_row(row: dict) -> dict:
    """Split complex entries into ``<key>_re`` and ``<key>_im``."""
    out = {}
    for key, value in row.items():
        if isinstance(value, (complex, np.complexfloating)):
            out[f"{key}_re"] = float(np.real(value))
            out[f"{key}_im"] = float(np.imag(value))
        else:
            out[key] = value
    return out


def _atomic_write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def csv_text(columns, rows) -> str:
    import io

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_cell(row.get(c, "")) for c in columns])
    return buf.getvalue()


def write_record(record: ResultRecord, out_dir, stem: str | None = None) -> tuple[Path, Path]:
    """Write ``<stem>.csv`` and ``<stem>.json``; returns both paths.

    The CSV holds only the numeric table so identical configurations give
    byte-identical files; timing and environment go to the sidecar.
    """
    out_dir = Path(out_dir)
    stem = stem or record.command
    csv_path = out_dir / f"{stem}.csv"
    json_path = out_dir / f"{stem}.json"
    _atomic_write_text(csv_path, csv_text(record.columns, record.rows))
    from . import __version__

    meta = {
        "command": record.command,
        "config_hash": record.config_hash,
        "tool_version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "columns": record.columns,
        "row_count": len(record.rows),
        **record.metadata,
    }
    _atomic_write_text(json_path, json.dumps(meta, indent=2, sort_keys=True, default=str) + "\n")
    return csv_path, json_path


def read_csv(path) -> tuple[list[str], list[dict]]:
    """Read a table written by :func:`write_record` back as floats where possible."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        rows = []
        for raw in reader:
            row = {}
            for key, value in raw.items():
                try:
                    row[key] = float(value)
                except ValueError:
                    row[key] = value
            rows.append(row)
        return list(reader.fieldnames or []), rows
