"""CSV writers for every table the toolkit emits.

Floats are written with 17 significant digits so identical numbers always
give identical bytes.
"""
from __future__ import annotations

import csv
import math
from pathlib import Path

import numpy as np


def fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        return format(v, ".17g")
    return str(v)


def write_rows(path, columns, rows, preamble=()):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        for line in preamble:
            fh.write(f"# {line}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            if isinstance(row, dict):
                row = [row.get(c, "") for c in columns]
            w.writerow([fmt(v) for v in row])
    return path


def write_trajectory(path, times, values, stderr, mode, nu, rho0, seed):
    cols = ["t", "value", "stderr", "mode", "nu", "rho0", "seed"]
    mode = getattr(mode, "value", mode)
    rows = ([t, v, s, mode, nu, rho0, seed] for t, v, s in zip(times, values, stderr))
    return write_rows(path, cols, rows)


def write_grid_field(path, xs, ys, values, stderr, meta: dict):
    """Header line with grid metadata, then one (x, y, value, stderr) row per node."""
    meta = {"nx": len(xs), "ny": len(ys), **meta}
    head = ";".join(f"{k}={fmt(v)}" for k, v in meta.items())
    values = np.asarray(values)
    stderr = np.asarray(stderr)
    rows = ([x, y, values[i, j], stderr[i, j]] for i, x in enumerate(xs) for j, y in enumerate(ys))
    return write_rows(path, ["x", "y", "value", "stderr"], rows, preamble=[head])


def read_grid_field(path):
    """(meta, xs, ys, values, stderr) from ``write_grid_field`` output."""
    with open(path) as fh:
        head = fh.readline()[2:].strip()
        meta = dict(kv.split("=", 1) for kv in head.split(";"))
        data = np.loadtxt(fh, delimiter=",", skiprows=1, ndmin=2)
    nx, ny = int(meta["nx"]), int(meta["ny"])
    xs = data[::ny, 0]
    ys = data[:ny, 1]
    return meta, xs, ys, data[:, 2].reshape(nx, ny), data[:, 3].reshape(nx, ny)


def write_convergence(path, rows):
    return write_rows(path, ["level", "eps", "delta", "distance", "stderr", "fitted_nu2"], rows)


def write_dimension(path, est, target, tol):
    """(m, C_m) rows followed by a summary row."""
    ok = abs(est.slope - target) <= tol
    rows = [[int(m), c] for m, c in zip(est.m, est.counts)]
    rows.append(["summary", f"slope={fmt(est.slope)}", f"stderr={fmt(est.stderr)}", f"target={fmt(target)}",
                 f"pass={fmt(ok)}"])
    return write_rows(path, ["m", "C_m"], rows)


def write_nu_table(path, rows):
    return write_rows(path, ["nu", "analytic", "mc_estimate", "stderr"], rows)
