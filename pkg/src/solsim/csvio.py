"""CSV writers and readers for run artifacts.

All floating-point values are written with 17 significant digits so that a
re-run with identical inputs produces byte-identical files and values
round-trip through text exactly.
"""

from __future__ import annotations

import os

import numpy as np


def _format(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return "%.17g" % float(value)


def write_csv(path: str, header: list[str], columns: list[np.ndarray]) -> int:
    """Write columns under a header row; returns the number of data rows."""
    if len(header) != len(columns):
        raise ValueError("header and column count mismatch")
    cols = [np.atleast_1d(np.asarray(c)) for c in columns]
    n_rows = cols[0].shape[0] if cols else 0
    if any(c.shape[0] != n_rows for c in cols):
        raise ValueError("columns must have equal length")
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for i in range(n_rows):
            fh.write(",".join(_format(c[i]) for c in cols) + "\n")
    return n_rows


def read_csv(path: str) -> tuple[list[str], np.ndarray]:
    """Read a CSV written by :func:`write_csv`; returns (header, 2D float array)."""
    with open(path) as fh:
        header = fh.readline().strip().split(",")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return header, data
