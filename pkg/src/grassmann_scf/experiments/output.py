"""CSV output with a commented header recording config and code version.

Layout::

    # experiment: toy_sweep
    # version: 0.1.0
    # config: beta=0.1
    # ...
    epsilon,solver,iterations,terminated,observed_rate
    ...
    # summary: scf_threshold_low=...

Floats are written with ``repr`` so files are byte-identical across reruns.
"""
from __future__ import annotations

import csv
import io
import math
import os

import numpy as np


def format_value(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if math.isnan(v):
            return "nan"
        return repr(v)
    return str(value)


def render_csv(experiment: str, config_items, columns, rows, summary=None, version: str = "") -> str:
    buf = io.StringIO()
    buf.write(f"# experiment: {experiment}\n")
    buf.write(f"# version: {version}\n")
    for key, value in config_items:
        buf.write(f"# config: {key}={format_value(value)}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([format_value(row[c]) for c in columns])
    for key, value in (summary or {}).items():
        buf.write(f"# summary: {key}={format_value(value)}\n")
    return buf.getvalue()


def write_csv(path: str, experiment: str, config_items, columns, rows, summary=None, version: str = "") -> str:
    text = render_csv(experiment, config_items, columns, rows, summary, version)
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    return text


def read_csv(path: str):
    """Parse a file written by :func:`write_csv` into (config, rows, summary)."""
    config, summary, body = {}, {}, []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.startswith("# config: "):
                k, v = line[len("# config: "):].rstrip("\n").split("=", 1)
                config[k] = v
            elif line.startswith("# summary: "):
                k, v = line[len("# summary: "):].rstrip("\n").split("=", 1)
                summary[k] = v
            elif line.startswith("#"):
                continue
            else:
                body.append(line)
    rows = list(csv.DictReader(body))
    return config, rows, summary
