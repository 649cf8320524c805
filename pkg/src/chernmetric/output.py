"""CSV and JSON writers that stamp every file with the run configuration.

Files are written to a temporary sibling and renamed into place, so a run
that fails part-way leaves no output behind.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import os
import sys
import tempfile

import numpy as np


def config_hash(config: dict) -> str:
    """sha256 of the canonical JSON form of ``config`` (output path and thread count excluded)."""
    relevant = {k: v for k, v in config.items() if k not in ("out", "threads")}
    text = json.dumps(relevant, sort_keys=True, separators=(",", ":"), default=_plain)
    return hashlib.sha256(text.encode()).hexdigest()


def run_header(command: str, config: dict) -> dict:
    return {
        "command": command,
        "config_hash": config_hash(config),
        "model": config["model"],
        "grid": config.get("grid"),
        "scheme": config["scheme"],
        "tolerances": config["tolerances"],
    }


def _plain(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def render_csv(header: dict, columns, rows) -> str:
    buf = io.StringIO()
    for key, value in header.items():
        buf.write(f"# {key}: {json.dumps(value, sort_keys=True, default=_plain)}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(row.get(c)) for c in columns])
    return buf.getvalue()


def render_json(header: dict, payload: dict) -> str:
    return json.dumps({"header": header, **payload}, indent=2, sort_keys=True, default=_plain) + "\n"


def read_csv(path):
    """Rows of a CSV written by :func:`render_csv` (header comments skipped), as dicts of strings."""
    with open(path, newline="") as fh:
        lines = [line for line in fh if not line.startswith("#")]
    return list(csv.DictReader(lines))


def emit(text: str, path: str | None):
    """Write ``text`` to ``path`` atomically, or to stdout when ``path`` is None or '-'."""
    if path in (None, "-"):
        sys.stdout.write(text)
        return
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".partial-")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
