"""Brownian motions and Brownian bridges on time grids.

A path of speed ``s`` has Var(B_1) = s.  Batch samplers return arrays of shape
(n_paths, len(t_points)); the single-path dataclasses are thin wrappers used
where a path travels through an API.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from . import seeding
from .errors import DomainError


@dataclass(frozen=True, eq=False)
class WienerPath:
    values: np.ndarray
    t_points: np.ndarray
    speed: float
    seed: int


@dataclass(frozen=True, eq=False)
class BridgePath:
    values: np.ndarray
    t_points: np.ndarray
    horizon: float
    endpoint: float
    speed: float


def _steps(t_points):
    t = np.asarray(t_points, dtype=float)
    if t.ndim != 1 or t.size < 1 or t[0] != 0.0 or np.any(np.diff(t) <= 0):
        raise DomainError("t_points must start at 0 and increase")
    return t, np.diff(t)


def standard_paths(gen: np.random.Generator, t_points, n_paths: int) -> np.ndarray:
    """Unit-speed Brownian motions, one per row, from an explicit generator."""
    t, dt = _steps(t_points)
    out = np.zeros((n_paths, t.size))
    np.cumsum(gen.standard_normal((n_paths, dt.size)) * np.sqrt(dt), axis=1, out=out[:, 1:])
    return out


def sample_bm(speed: float, t_points, seed: int) -> WienerPath:
    if not speed > 0:
        raise DomainError("speed must be positive")
    t, _ = _steps(t_points)
    unit = standard_paths(seeding.rng(seed, "paths", "bm"), t, 1)[0]
    return WienerPath(np.sqrt(speed) * unit, t, float(speed), int(seed))


def sample_bm_batch(speed: float, t_points, n_paths: int, seed: int, *path) -> np.ndarray:
    """``n_paths`` independent paths from the stream ``(seed, "paths", *path)``."""
    if not speed > 0:
        raise DomainError("speed must be positive")
    return np.sqrt(speed) * standard_paths(seeding.rng(seed, "paths", *path), t_points, n_paths)


def bridge_values(values, t_points, horizon, endpoint):
    """B_s - (s / t)(B_t - a); works on a single path or a batch (last axis = time)."""
    t = np.asarray(t_points, dtype=float)
    if abs(t[-1] - horizon) > 1e-12 * max(1.0, horizon):
        raise DomainError("bridge horizon must be the final grid time")
    values = np.asarray(values, dtype=float)
    frac = t / t[-1]
    out = values - frac * (values[..., -1:] - endpoint)
    # pin both ends exactly
    out[..., 0] = 0.0
    out[..., -1] = endpoint
    return out


def to_bridge(path: WienerPath, t: float, a: float) -> BridgePath:
    return BridgePath(bridge_values(path.values, path.t_points, t, a), path.t_points,
                      float(t), float(a), path.speed)


def write_paths_csv(path, t_points, values) -> None:
    """Debug dump: one row per time, one column per path."""
    values = np.atleast_2d(values)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + [f"path{k}" for k in range(values.shape[0])])
        for j, t in enumerate(t_points):
            w.writerow([repr(float(t))] + [repr(float(v)) for v in values[:, j]])


def refine_midpoints(values, speed: float, spacing: float, levels: int, gen: np.random.Generator):
    """Insert Brownian-bridge midpoints ``levels`` times between consecutive samples.

    ``values`` is a 1-D path sampled at uniform ``spacing``.  Returns the path on
    the grid with spacing ``spacing / 2**levels``.
    """
    pts = np.asarray(values, dtype=float)
    h = spacing
    for _ in range(levels):
        mids = 0.5 * (pts[:-1] + pts[1:]) + np.sqrt(speed * h / 4.0) * gen.standard_normal(pts.size - 1)
        nxt = np.empty(2 * pts.size - 1)
        nxt[0::2] = pts
        nxt[1::2] = mids
        pts = nxt
        h /= 2.0
    return pts
