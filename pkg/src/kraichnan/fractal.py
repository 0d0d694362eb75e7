"""Macroscopic box-counting dimension of time sets.

A set A of times is recorded by which unit boxes [j, j+1], j = 0..m, it meets;
C_m(A) is the number of such boxes up to m and the macroscopic dimension is
the growth exponent of C_m in m.  The generators below build the sets that
arise for Brownian motion, the stationary Ornstein-Uhlenbeck process and the
decay times of Gamma_t(0, 0) for a constant correlation kernel.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _accel, parallel, seeding
from .errors import DomainError, InsufficientDataError

BLOCK = 1 << 16
DEFAULT_LEVELS = 4


@dataclass(frozen=True)
class TimeSet:
    """hit[j] is True when the set meets the unit box [j, j+1]."""

    hit: np.ndarray
    label: str = ""

    def __post_init__(self):
        h = np.asarray(self.hit, dtype=bool)
        if h.ndim != 1 or h.size < 1:
            raise DomainError("hit must be a non-empty 1-d array")
        object.__setattr__(self, "hit", h)

    @property
    def horizon(self) -> int:
        return self.hit.size - 1

    @classmethod
    def from_points(cls, points, horizon: int, label: str = "") -> TimeSet:
        hit = np.zeros(horizon + 1, dtype=bool)
        j = np.floor(np.asarray(points, dtype=float)).astype(np.int64)
        hit[j[(j >= 0) & (j <= horizon)]] = True
        return cls(hit, label)

    def union(self, other: TimeSet) -> TimeSet:
        if other.horizon != self.horizon:
            raise DomainError("horizons differ")
        return TimeSet(self.hit | other.hit, self.label)

    def counts(self) -> np.ndarray:
        """C_m for every m = 0..horizon."""
        return np.cumsum(self.hit)


def count_boxes(ts: TimeSet, m: int) -> int:
    if m > ts.horizon or m < 0:
        raise DomainError("m must lie in [0, horizon]")
    return int(np.count_nonzero(ts.hit[: m + 1]))


@dataclass(frozen=True)
class DimEstimate:
    slope: float
    stderr: float
    window: tuple
    m: np.ndarray = field(repr=False)
    counts: np.ndarray = field(repr=False)  # mean C_m per replicate

    @property
    def in_band(self) -> bool:
        return -0.2 <= self.slope <= 1.2


def geometric_grid(horizon: int, m_min: int = 100, ratio: float = 2.0) -> np.ndarray:
    k = np.arange(int(math.floor(math.log(horizon / m_min) / math.log(ratio))) + 1)
    return np.unique(np.round(m_min * ratio**k).astype(np.int64))


def _wls_slope(m, c):
    x, y, w = np.log(m), np.log(c), c
    xb = np.sum(w * x) / w.sum()
    yb = np.sum(w * y) / w.sum()
    sxx = np.sum(w * (x - xb) ** 2)
    slope = float(np.sum(w * (x - xb) * (y - yb)) / sxx)
    resid = y - yb - slope * (x - xb)
    return slope, float(math.sqrt(np.sum(w * resid**2) / (m.size - 2) / sxx))


def estimate_dim(sets, m_grid=None, min_decades: float = 1.5) -> DimEstimate:
    """Weighted least-squares slope of log C_m against log m.

    ``sets`` is one TimeSet or a sequence of independent replicates of the
    same random set, whose counts are pooled (summed) before the fit.  With
    Poisson-like counts Var(log C_m) is about 1/C_m, so C_m is the regression
    weight.  For one set the stderr is the weighted-regression standard
    error; for replicates it is the leave-one-out jackknife error, which also
    captures the path-to-path fluctuation of the counts.
    """
    sets = [sets] if isinstance(sets, TimeSet) else list(sets)
    if not sets:
        raise InsufficientDataError("no sets given")
    horizon = sets[0].horizon
    if any(s.horizon != horizon for s in sets):
        raise DomainError("replicates must share a horizon")
    m = geometric_grid(horizon) if m_grid is None else np.asarray(m_grid, dtype=np.int64)
    if m.size and (m.min() < 1 or m.max() > horizon):
        raise DomainError("m grid must lie in [1, horizon]")
    per_set = np.array([s.counts()[m] for s in sets], dtype=float).reshape(len(sets), m.size)
    total = per_set.sum(axis=0)
    ok = total > 0
    m, per_set, total = m[ok], per_set[:, ok], total[ok]
    if m.size < 4:
        raise InsufficientDataError("fewer than four m values with non-zero counts")
    if math.log10(m[-1] / m[0]) < min_decades - 1e-9:
        raise InsufficientDataError(f"m grid spans less than {min_decades} decades")
    slope, se = _wls_slope(m, total)
    r = len(sets)
    if r > 1:
        loo = []
        for i in range(r):
            c = total - per_set[i]
            if np.all(c > 0):
                loo.append(_wls_slope(m, c)[0])
        if len(loo) > 1:
            loo = np.asarray(loo)
            se = float(math.sqrt((len(loo) - 1) / len(loo) * np.sum((loo - loo.mean()) ** 2)))
    return DimEstimate(slope, se, (int(m[0]), int(m[-1])), m, total / r)


# ---------------------------------------------------------------------------
# Brownian motion sets

def brownian_integers(horizon: int, seed: int) -> np.ndarray:
    """W at t = 0, 1, ..., horizon + 1 (one more point than boxes)."""
    steps = parallel.map_blocks(lambda b, s: seeding.rng(seed, "fractal", "bm", b).standard_normal(s),
                                horizon + 1, BLOCK)
    return np.concatenate([[0.0], np.cumsum(steps)])


def _crossings(values, level, seed, levels, tag):
    n_boxes = values.size - 1
    k = (1 << levels) - 1

    def block(b, size):
        lo = b * BLOCK
        normals = seeding.rng(seed, "fractal", tag, b).standard_normal((size, k))
        return np.asarray(_accel.bridge_crossings(values[lo:lo + size + 1], float(level), 1.0, normals, levels),
                          dtype=bool)

    return parallel.map_blocks(block, n_boxes, BLOCK)


def bm_level_set(z: float, horizon: int, refinement_levels: int = DEFAULT_LEVELS, seed: int = 0,
                 values=None) -> TimeSet:
    """Boxes in which a standard Brownian motion crosses level z.

    Crossings are sign changes of W - z after ``refinement_levels`` rounds of
    Brownian-bridge midpoint insertion, so excursions shorter than 2^-levels
    can still be missed.  ``values`` reuses an existing integer-time path.
    """
    if horizon < 1:
        raise DomainError("horizon must be positive")
    w = brownian_integers(horizon, seed) if values is None else np.asarray(values, dtype=float)
    if w.size != horizon + 2:
        raise DomainError("values must hold W at 0..horizon+1")
    hit = _crossings(w, z, seed, refinement_levels, "refine")
    return TimeSet(hit, f"level z={z}")


def bm_cone_set(z: float, alpha: float, horizon: int, seed: int = 0, values=None) -> TimeSet:
    """Boxes [j, j+1] with |W_t - z| < alpha sqrt(t) at t = j or t = j+1."""
    if not alpha > 0:
        raise DomainError("alpha must be positive")
    w = brownian_integers(horizon, seed) if values is None else np.asarray(values, dtype=float)
    t = np.arange(w.size, dtype=float)
    inside = np.abs(w - z) < alpha * np.sqrt(t)
    return TimeSet(inside[:-1] | inside[1:], f"cone z={z} alpha={alpha}")


# ---------------------------------------------------------------------------
# Ornstein-Uhlenbeck sets

def ou_path(horizon: float, rate: float, refinement_levels: int, seed: int, tag: str = "ou") -> np.ndarray:
    """Stationary OU with Cov[U_s, U_t] = exp(-rate |t-s|) at spacing 2^-levels on [0, horizon+1].

    Exact AR(1) recursion, started from the stationary law.
    """
    per = 1 << refinement_levels
    h = 1.0 / per
    coef = math.exp(-rate * h)
    scale = math.sqrt(-math.expm1(-2 * rate * h))
    n_steps = (int(horizon) + 1) * per
    gen0 = seeding.rng(seed, "fractal", tag, "start")
    out = [np.array([gen0.standard_normal()])]
    x = out[0][0]
    # AR(1) is sequential; blocks only fix the stream layout
    for b, size in enumerate(parallel.block_sizes(n_steps, BLOCK * per)):
        normals = seeding.rng(seed, "fractal", tag, b).standard_normal(size)
        seg = np.asarray(_accel.ar1(float(x), coef, scale, normals))
        out.append(seg[1:])
        x = seg[-1]
    return np.concatenate(out)


def _boxes_where(mask, per):
    """Per-box OR of a fine-grid mask whose samples k/per cover [0, horizon+1]."""
    n_boxes = (mask.size - 1) // per
    body = mask[:-1].reshape(n_boxes, per).any(axis=1)
    ends = mask[per::per]
    return body | ends


def ou_exceedance(alpha: float, horizon: int, seed: int = 0, refinement_levels: int = DEFAULT_LEVELS,
                  rate: float = 1.0) -> TimeSet:
    """Boxes where |U_t| > sqrt(alpha log t) at a sampled t > e."""
    if not alpha > 0:
        raise DomainError("alpha must be positive")
    per = 1 << refinement_levels
    u = ou_path(horizon, rate, refinement_levels, seed)
    t = np.arange(u.size) / per
    mask = np.zeros(u.size, dtype=bool)
    late = t > math.e
    mask[late] = u[late] ** 2 > alpha * np.log(t[late])
    return TimeSet(_boxes_where(mask, per), f"ou alpha={alpha}")


# ---------------------------------------------------------------------------
# Gamma_t(0, 0) for a constant kernel

def cone_width(nu: float, rho0: float, K: float) -> float | None:
    """alpha with {Gamma_t(0,0) > K/t} = {|W_t| < alpha sqrt(t)}, or None if the set is empty."""
    if not (nu > 0 and rho0 > 0 and K > 0):
        raise DomainError("nu, rho0 and K must be positive")
    arg = math.log(1.0 / (4 * math.pi * nu * K))
    if arg <= 0:
        return None
    return math.sqrt(4 * nu / rho0 * arg)


def gamma_exceedance_set(nu: float, rho0: float, K: float, horizon: int, seed: int = 0, values=None) -> TimeSet:
    """Boxes where t Gamma_t(0, 0) > K.

    With Gamma_t(0,0) = exp(-rho0 W_t^2 / (4 nu t)) / (4 pi nu t) this is a
    cone set of W, and it is empty once K >= 1/(4 pi nu).
    """
    alpha = cone_width(nu, rho0, K)
    if alpha is None:
        return TimeSet(np.zeros(horizon + 1, dtype=bool), f"gamma K={K}")
    ts = bm_cone_set(0.0, alpha, horizon, seed, values)
    return TimeSet(ts.hit, f"gamma K={K}")


def gamma_level_set(nu: float, rho0: float, x: float, horizon: int, seed: int = 0,
                    refinement_levels: int = DEFAULT_LEVELS) -> TimeSet:
    """Boxes where Gamma_t(0,0) = exp(-x^2/(4 nu t))/(4 pi nu t), i.e. W_t = +-x/sqrt(rho0)."""
    w = brownian_integers(horizon, seed)
    z = x / math.sqrt(rho0)
    a = bm_level_set(z, horizon, refinement_levels, seed, w)
    if z == 0:
        return a
    return a.union(bm_level_set(-z, horizon, refinement_levels, seed, w))


def gamma_decay_logset(nu: float, rho0: float, delta: float, log_horizon: int, seed: int = 0,
                       refinement_levels: int = DEFAULT_LEVELS) -> TimeSet:
    """Log-time boxes of {t > e: Gamma_t(0, 0) < 1 / (t (log t)^delta)}.

    With s = log t and U_s = W_{e^s} e^{-s/2}, a stationary OU process with
    covariance exp(-|s - s'|/2), membership reads
    U_s^2 > (4 nu/rho0) log(s^delta / (4 pi nu)) for s > 1.  U is sampled
    exactly at spacing 2^-levels and boxes are unit intervals in s.
    """
    if not (delta > 0 and nu > 0 and rho0 > 0):
        raise DomainError("nu, rho0 and delta must be positive")
    per = 1 << refinement_levels
    u = ou_path(log_horizon, 0.5, refinement_levels, seed, "logset")
    s = np.arange(u.size) / per
    mask = np.zeros(u.size, dtype=bool)
    late = s > 1.0
    mask[late] = u[late] ** 2 > 4 * nu / rho0 * (delta * np.log(s[late]) - math.log(4 * math.pi * nu))
    return TimeSet(_boxes_where(mask, per), f"decay delta={delta}")


def decay_dimension(nu: float, rho0: float, delta: float) -> float:
    return max(0.0, 1.0 - 2 * delta * nu / rho0)


def dim_or_zero(sets, m_grid=None) -> float:
    """Slope of ``estimate_dim``, with 0 when every set is empty."""
    try:
        return estimate_dim(sets, m_grid).slope
    except InsufficientDataError:
        sets = [sets] if isinstance(sets, TimeSet) else list(sets)
        if all(s.counts()[-1] == 0 for s in sets):
            return 0.0
        raise
