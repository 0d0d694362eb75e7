"""Pure-numpy versions of the compiled kernels in ``_core.pyx``."""
import numpy as np
from scipy.signal import lfilter


def ar1(x0, coef, innov_scale, normals):
    normals = np.asarray(normals, dtype=np.float64)
    out = np.empty(normals.size + 1)
    out[0] = x0
    # x[k+1] = coef*x[k] + e[k] is a one-pole IIR filter seeded with x0
    out[1:], _ = lfilter([1.0], [1.0, -coef], innov_scale * normals, zi=[coef * x0])
    return out


def bridge_crossings(values, level, speed, normals, levels):
    values = np.asarray(values, dtype=np.float64)
    n = values.size - 1
    pts = np.empty((n, 2))
    pts[:, 0] = values[:-1]
    pts[:, 1] = values[1:]
    h = 1.0
    idx = 0
    for _ in range(levels):
        k = pts.shape[1] - 1
        sd = np.sqrt(speed * h / 4.0)
        mids = 0.5 * (pts[:, :-1] + pts[:, 1:]) + sd * normals[:, idx:idx + k]
        idx += k
        nxt = np.empty((n, 2 * k + 1))
        nxt[:, 0::2] = pts
        nxt[:, 1::2] = mids
        pts = nxt
        h /= 2.0
    d = pts - level
    return np.any(d[:, :-1] * d[:, 1:] <= 0.0, axis=1)


def curvilinear_sum(increments, x0, dx, positions):
    n = increments.shape[1]
    u = (positions - x0) / dx
    i = np.clip(np.floor(u).astype(np.intp), 0, n - 2)
    w = u - i
    rows = np.arange(positions.shape[1])[None, :]
    vals = (1.0 - w) * increments[rows, i] + w * increments[rows, i + 1]
    return vals.sum(axis=1)
