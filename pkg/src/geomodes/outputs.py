"""Deterministic file output: CSV tables and structured text reports.

All writes go through a temp-file-plus-rename so consumers never observe a
half-written artifact, and all floats are formatted with 17 significant
digits so repeated runs are byte-identical.
"""
from __future__ import annotations

import os
import tempfile
from pathlib import Path

import numpy as np

FLOAT_FMT = "%.17g"


def fmt(x) -> str:
    """Canonical float formatting used in every artifact."""
    return FLOAT_FMT % float(x)


def atomic_write_text(path, text: str):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path, header: list, columns: list):
    """Write named columns of equal length as CSV."""
    cols = [np.asarray(c, dtype=float) for c in columns]
    if len(cols) != len(header):
        raise ValueError("header and column counts differ")
    m = len(cols[0])
    lines = [",".join(header)]
    for i in range(m):
        lines.append(",".join(fmt(c[i]) for c in cols))
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_csv(path):
    """Read a CSV written by write_csv; returns (header list, (m, k) array)."""
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    return header, data


def trajectory_csv(path, traj):
    n = traj.q.shape[1]
    header = ["t"] + [f"q{i + 1}" for i in range(n)] + [f"qd{i + 1}" for i in range(n)] + ["E"]
    cols = [traj.t] + [traj.q[:, i] for i in range(n)] + [traj.qdot[:, i] for i in range(n)] + [traj.energy]
    write_csv(path, header, cols)


def geodesic_csv(path, curve):
    write_csv(
        path,
        ["s", "q1", "q2", "w1", "w2"],
        [curve.s, curve.q[:, 0], curve.q[:, 1], curve.w[:, 0], curve.w[:, 1]],
    )


def chart_grid_csv(path, xi1, xi2, points):
    """Flatten a chart image grid to columns xi1, xi2, q1, q2."""
    n1, n2 = len(xi1), len(xi2)
    a1 = np.repeat(xi1, n2)
    a2 = np.tile(xi2, n1)
    flat = points.reshape(n1 * n2, 2)
    write_csv(path, ["xi1", "xi2", "q1", "q2"], [a1, a2, flat[:, 0], flat[:, 1]])


def report_text(title: str, sections: list) -> str:
    """Render [section] blocks of key = value lines; floats canonical."""
    lines = [f"# {title}"]
    for name, entries in sections:
        lines.append("")
        lines.append(f"[{name}]")
        for key, value in entries:
            if isinstance(value, float):
                value = fmt(value)
            lines.append(f"{key} = {value}")
    return "\n".join(lines) + "\n"


def load_curve_csv(path) -> np.ndarray:
    """Extract configuration points from any CSV carrying q1, q2 columns."""
    header, data = read_csv(path)
    try:
        i1, i2 = header.index("q1"), header.index("q2")
    except ValueError:
        raise ValueError(f"{path}: need q1 and q2 columns, found {header}") from None
    return data[:, [i1, i2]]
