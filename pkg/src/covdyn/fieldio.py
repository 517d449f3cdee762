"""Columnar text export of grid fields.

One row per (t, x) grid point.  Columns are ``t``, ``x1..xd`` and then the
field components, named ``y1..ym`` for configurations unless other names are
given.  Rows are ordered with time slowest and the last body axis fastest.
"""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Optional, Sequence

import numpy as np


def field_rows(times, grid_x, values):
    """Flatten ``values[(T+1), *shape, k]`` into a ``(rows, 1 + d + k)`` table."""
    values = np.asarray(values, float)
    times = np.asarray(times, float)
    d = grid_x.shape[-1]
    npts = int(np.prod(grid_x.shape[:-1]))
    xs = grid_x.reshape(npts, d)
    flat = values.reshape(len(times), npts, -1)
    tcol = np.repeat(times, npts)[:, None]
    return np.hstack([tcol, np.tile(xs, (len(times), 1)), flat.reshape(len(times) * npts, -1)])


def write_field(path, times, grid_x, values, names: Optional[Sequence[str]] = None):
    """Write a field as CSV with a header row."""
    table = field_rows(times, grid_x, values)
    d = grid_x.shape[-1]
    k = table.shape[1] - 1 - d
    names = list(names) if names is not None else [f"y{i + 1}" for i in range(k)]
    if len(names) != k:
        raise ValueError(f"expected {k} component names, got {len(names)}")
    header = ["t"] + [f"x{a + 1}" for a in range(d)] + names
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in table:
            w.writerow([repr(float(v)) for v in row])
    return path


def write_motion(path, motion, names=None):
    return write_field(path, motion.times, motion.grid.x, motion.values, names)


def read_field(path):
    """Return ``(header, table)`` from a file written by :func:`write_field`."""
    with Path(path).open() as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array([[float(v) for v in r] for r in rows[1:]])


def tensor_component_names(prefix, shape):
    """``A1_0_1``-style names for the flattened components of a tensor field."""
    return [prefix + "_" + "_".join(str(i) for i in idx) for idx in np.ndindex(*shape)]
