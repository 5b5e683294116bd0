"""CSV and report output.

Floats are written with 17 significant digits so every value survives a
text round trip bit for bit.
"""
from __future__ import annotations

import csv
from pathlib import Path

import numpy as np


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def write_csv(path, columns, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(columns)
        for row in rows:
            if len(row) != len(columns):
                raise ValueError(f"row of length {len(row)} for {len(columns)} columns")
            w.writerow([_fmt(v) for v in row])
    return path


def read_csv(path):
    """Header and rows as strings; numeric columns are left to the caller."""
    with Path(path).open(newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        return header, [row for row in r]


def write_report(path, items: dict) -> Path:
    """``key = value`` summary file."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w") as fh:
        for k, v in items.items():
            fh.write(f"{k} = {_fmt(v)}\n")
    return path


def mean_sem(samples, axis=0):
    """Mean and standard error (ddof=1) along ``axis``."""
    x = np.asarray(samples, dtype=float)
    n = x.shape[axis]
    if n < 2:
        raise ValueError("need at least two samples for an error estimate")
    return x.mean(axis=axis), x.std(axis=axis, ddof=1) / np.sqrt(n)
