"""Grid realizations of the white-in-time, spatially correlated velocity field.

The field is stored through its time integral W(t, x): a realization holds the
increments W(t_{j+1}, x_i) - W(t_j, x_i) for every time step j and grid point
i.  Each row is an independent centered Gaussian vector with covariance
dt * rho(x_i - x_k).
"""
from __future__ import annotations

import csv
import enum
import functools
import math
import struct
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from . import parallel, seeding
from .errors import DegenerateKernelError, DomainError, OutOfDomainError, ResolutionError
from .kernels import CorrelationKernel, Family, heat_kernel

JITTERS = tuple(np.geomspace(1e-12, 1e-8, 4))
DENSE_MAX = 2048
_ROW_BLOCK = 256


@dataclass(frozen=True, eq=False)
class SpaceTimeGrid:
    x_points: np.ndarray
    t_points: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x_points, dtype=float)
        t = np.asarray(self.t_points, dtype=float)
        if x.ndim != 1 or x.size < 2:
            raise DomainError("need at least two spatial points")
        if t.ndim != 1 or t.size < 2 or t[0] != 0.0:
            raise DomainError("time grid must start at 0 and have at least one step")
        for name, arr in (("x", x), ("t", t)):
            d = np.diff(arr)
            if np.any(d <= 0) or np.max(np.abs(d - d[0])) > 1e-12 * max(abs(arr[-1]), abs(arr[0]), 1.0):
                raise DomainError(f"{name} grid must be uniformly spaced")
        x.flags.writeable = False
        t.flags.writeable = False
        object.__setattr__(self, "x_points", x)
        object.__setattr__(self, "t_points", t)

    @classmethod
    def uniform(cls, x_min, x_max, n, T, m) -> SpaceTimeGrid:
        return cls(np.linspace(x_min, x_max, int(n)), np.linspace(0.0, T, int(m) + 1))

    @property
    def n(self) -> int:
        return self.x_points.size

    @property
    def m(self) -> int:
        return self.t_points.size - 1

    @property
    def dx(self) -> float:
        return (self.x_points[-1] - self.x_points[0]) / (self.n - 1)

    @property
    def dt(self) -> float:
        return self.t_points[-1] / self.m

    @property
    def T(self) -> float:
        return float(self.t_points[-1])

    def t_index(self, t: float) -> int:
        """Index k with t_points[k] == t (to rounding)."""
        k = int(round(t / self.dt))
        if k < 0 or k > self.m or abs(self.t_points[k] - t) > 1e-9 * max(1.0, t):
            raise DomainError(f"t={t} is not a grid time")
        return k

    def key(self):
        return (self.x_points[0], self.x_points[-1], self.n, self.T, self.m)


# ---------------------------------------------------------------------------
# spatial covariance factorization

def covariance_factor(kernel: CorrelationKernel, x) -> np.ndarray:
    """Lower-triangular L with L @ L.T = rho(x_i - x_k) + jitter * rho0 * I."""
    x = np.asarray(x, dtype=float)
    cov = kernel(x[:, None] - x[None, :])
    eye = np.eye(x.size)
    for jitter in JITTERS:
        try:
            return np.linalg.cholesky(cov + jitter * kernel.rho0 * eye)
        except np.linalg.LinAlgError:
            continue
    raise DegenerateKernelError(
        f"covariance not factorizable with jitter up to {JITTERS[-1]:.0e} * rho0")


@functools.lru_cache(maxsize=16)
def _dense_factor_cached(kernel, x0, x1, n):
    return covariance_factor(kernel, np.linspace(x0, x1, n))


@functools.lru_cache(maxsize=16)
def _circulant_eigs(kernel, dx, n):
    # embed the first covariance row in a circulant of size 2(N-1), N >= n
    for pad in (1, 2, 4, 8):
        big = n * pad
        c = kernel(dx * np.arange(big))
        ext = np.concatenate([c, c[-2:0:-1]])
        lam = np.fft.fft(ext).real
        if lam.min() >= -1e-8 * lam.max():
            return np.sqrt(np.clip(lam, 0.0, None) / ext.size)
    raise DegenerateKernelError("circulant embedding is not nonnegative definite")


class _SpatialSampler:
    """Draws rows of standard-covariance spatial fields from per-row streams."""

    def __init__(self, kernel: CorrelationKernel, grid: SpaceTimeGrid, method: str):
        self.kernel = kernel
        self.n = grid.n
        self.method = method
        if method == "dense":
            self.factor = _dense_factor_cached(kernel, grid.x_points[0], grid.x_points[-1], grid.n)
        elif method == "circulant":
            self.sqrt_eigs = _circulant_eigs(kernel, grid.dx, grid.n)

    def row(self, gen: np.random.Generator) -> np.ndarray:
        if self.method == "constant":
            return np.full(self.n, math.sqrt(self.kernel.rho0) * gen.standard_normal())
        if self.method == "dense":
            return self.factor @ gen.standard_normal(self.n)
        size = self.sqrt_eigs.size
        z = gen.standard_normal(size) + 1j * gen.standard_normal(size)
        return np.fft.fft(self.sqrt_eigs * z).real[: self.n]


def _choose_method(kernel, grid, method):
    if kernel.family is Family.CONSTANT:
        return "constant"
    if method == "auto":
        return "dense" if grid.n <= DENSE_MAX else "circulant"
    if method not in ("dense", "circulant"):
        raise DomainError(f"unknown factorization method {method!r}")
    return method


# ---------------------------------------------------------------------------
# realizations

@dataclass(frozen=True, eq=False)
class NoiseRealization:
    increments: np.ndarray
    kernel: CorrelationKernel
    grid: SpaceTimeGrid
    seed: int

    def __post_init__(self):
        inc = np.ascontiguousarray(self.increments, dtype=np.float64)
        if inc.shape != (self.grid.m, self.grid.n):
            raise DomainError("increments must have shape (m, n)")
        inc.flags.writeable = False
        object.__setattr__(self, "increments", inc)

    @classmethod
    def zero(cls, kernel, grid) -> NoiseRealization:
        return cls(np.zeros((grid.m, grid.n)), kernel, grid, 0)

    @functools.cached_property
    def W(self) -> np.ndarray:
        """W(t_j, x_i) for j = 0..m; row 0 is identically zero."""
        out = np.zeros((self.grid.m + 1, self.grid.n))
        np.cumsum(self.increments, axis=0, out=out[1:])
        out.flags.writeable = False
        return out

    def W_at(self, t, x):
        """W off the grid: linear in x, and linear in t within a step.

        The increment of step j is attributed at constant rate over the step,
        which keeps distinct steps independent.
        """
        g = self.grid
        t = np.asarray(t, dtype=float)
        x = np.asarray(x, dtype=float)
        if np.any(t < 0) or np.any(t > g.T * (1 + 1e-12)):
            raise OutOfDomainError("t outside [0, T]")
        if np.any(x < g.x_points[0]) or np.any(x > g.x_points[-1]):
            raise OutOfDomainError("x outside the spatial grid")
        s = np.clip(t / g.dt, 0, g.m)
        j = np.minimum(np.floor(s).astype(np.intp), g.m - 1)
        ft = s - j
        u = (x - g.x_points[0]) / g.dx
        i = np.clip(np.floor(u).astype(np.intp), 0, g.n - 2)
        fx = u - i
        W = self.W

        def at(jj):
            return (1 - fx) * W[jj, i] + fx * W[jj, i + 1]

        out = (1 - ft) * at(j) + ft * at(j + 1)
        return float(out) if out.ndim == 0 else out

    # cache format -------------------------------------------------------------
    _MAGIC = b"KRNOISE\x00"
    _VERSION = 1
    _HEADER = struct.Struct("<8sIQQQ8sddd")

    def save(self, path) -> None:
        """Write the binary cache: header then row-major little-endian float64."""
        g = self.grid
        header = self._HEADER.pack(self._MAGIC, self._VERSION, g.m, g.n, self.seed & (2**64 - 1),
                                   self.kernel.digest(), g.x_points[0], g.x_points[-1], g.T)
        with open(path, "wb") as fh:
            fh.write(header)
            fh.write(self.increments.astype("<f8").tobytes(order="C"))

    @classmethod
    def load(cls, path, kernel: CorrelationKernel) -> NoiseRealization:
        with open(path, "rb") as fh:
            raw = fh.read()
        magic, version, m, n, seed, digest, x0, x1, T = cls._HEADER.unpack_from(raw)
        if magic != cls._MAGIC or version != cls._VERSION:
            raise DomainError("not a noise cache file")
        if digest != kernel.digest():
            raise DomainError("cache was written for a different kernel")
        body = np.frombuffer(raw, dtype="<f8", offset=cls._HEADER.size)
        if body.size != m * n:
            raise DomainError("truncated noise cache")
        grid = SpaceTimeGrid.uniform(x0, x1, n, T, m)
        return cls(body.reshape(m, n).astype(np.float64), kernel, grid, seed)

    def write_snapshots_csv(self, path, times) -> None:
        """CSV of W(t, x) on the spatial grid at the requested grid times."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "x", "W"])
            for t in times:
                k = self.grid.t_index(t)
                for x, val in zip(self.grid.x_points, self.W[k]):
                    w.writerow([repr(float(self.grid.t_points[k])), repr(float(x)), repr(float(val))])


def sample_noise(kernel: CorrelationKernel, grid: SpaceTimeGrid, seed: int,
                 method: str = "auto") -> NoiseRealization:
    """Draw a realization; row j uses the stream ``(seed, "noise", j)``."""
    sampler = _SpatialSampler(kernel, grid, _choose_method(kernel, grid, method))
    scale = math.sqrt(grid.dt)

    def block(b, size):
        start = b * _ROW_BLOCK
        return np.stack([sampler.row(seeding.rng(seed, "noise", j)) for j in range(start, start + size)])

    inc = parallel.map_blocks(block, grid.m, block=_ROW_BLOCK) * scale
    return NoiseRealization(inc, kernel, grid, int(seed))


# ---------------------------------------------------------------------------
# mollifiers

class MollifierShape(str, enum.Enum):
    HEAT = "heat"
    BUMP = "bump"


def _bump(z):
    z = np.asarray(z, dtype=float)
    out = np.zeros_like(z)
    inside = np.abs(z) < 1
    out[inside] = np.exp(-1.0 / (1.0 - z[inside] ** 2))
    return out


@functools.lru_cache(maxsize=1)
def _bump_cdf_table():
    z = np.linspace(-1.0, 1.0, 20001)
    f = _bump(z)
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * (f[1:] + f[:-1]) * np.diff(z))])
    return z, cdf / cdf[-1], 1.0 / cdf[-1]


@dataclass(frozen=True)
class MollifierSpec:
    """Approximate identity in time (width ``eps``) and space (width ``delta``).

    HEAT uses the heat kernels p_eps and p_delta at diffusivity ``nu`` (standard
    deviations sqrt(2 nu eps), sqrt(2 nu delta)); BUMP uses the normalized
    C-infinity bump exp(-1/(1-z^2)) on (-1, 1), scaled to radius eps / delta.
    """

    shape: MollifierShape
    eps: float
    delta: float
    nu: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "shape", MollifierShape(self.shape))
        if not (self.eps > 0 and self.delta > 0 and self.nu > 0):
            raise DomainError("mollifier widths must be positive")

    def time_width(self) -> float:
        return math.sqrt(2 * self.nu * self.eps) if self.shape is MollifierShape.HEAT else self.eps

    def space_width(self) -> float:
        return math.sqrt(2 * self.nu * self.delta) if self.shape is MollifierShape.HEAT else self.delta

    def support(self, which: str) -> float:
        w = self.time_width() if which == "t" else self.space_width()
        return 8.0 * w if self.shape is MollifierShape.HEAT else w

    def density(self, which: str, z):
        width_param = self.eps if which == "t" else self.delta
        if self.shape is MollifierShape.HEAT:
            return heat_kernel(self.nu, width_param, z)
        scale = _bump_cdf_table()[2]
        return scale * _bump(np.asarray(z) / width_param) / width_param

    def cdf(self, which: str, z):
        z = np.asarray(z, dtype=float)
        if self.shape is MollifierShape.HEAT:
            return ndtr(z / (self.time_width() if which == "t" else self.space_width()))
        zz, cdf, _ = _bump_cdf_table()
        width_param = self.eps if which == "t" else self.delta
        return np.interp(z / width_param, zz, cdf, left=0.0, right=1.0)


def _check_resolution(spec: MollifierSpec, grid: SpaceTimeGrid):
    if spec.time_width() < 2 * grid.dt or spec.space_width() < 2 * grid.dx:
        raise ResolutionError("mollifier widths must be at least two grid spacings")


def time_weights(spec: MollifierSpec, grid: SpaceTimeGrid, t) -> np.ndarray:
    """a[k, j] = (1/dt) * integral over step j of phi_eps(t_k - s) ds."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    edges = grid.t_points
    c = spec.cdf("t", t[:, None] - edges[None, :])
    return (c[:, :-1] - c[:, 1:]) / grid.dt


def space_weights(spec: MollifierSpec, grid: SpaceTimeGrid, x) -> np.ndarray:
    """w[k, i] proportional to psi_delta(x_k - x_i), normalized to sum 1."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    lo, hi = grid.x_points[0], grid.x_points[-1]
    reach = spec.support("x")
    if np.any(x - reach < lo - grid.dx) or np.any(x + reach > hi + grid.dx):
        raise OutOfDomainError("spatial mollifier support leaves the grid")
    w = spec.density("x", x[:, None] - grid.x_points[None, :])
    return w / w.sum(axis=1, keepdims=True)


def mollified_value(noise: NoiseRealization, spec: MollifierSpec, t: float, x: float) -> float:
    """Quadrature approximation of the mollified velocity V_{eps,delta}(t, x)."""
    g = noise.grid
    _check_resolution(spec, g)
    if not 0 <= t <= g.T:
        raise OutOfDomainError("t outside [0, T]")
    a = time_weights(spec, g, t)[0]
    w = space_weights(spec, g, x)[0]
    return float(a @ noise.increments @ w)


def mollified_field(noise: NoiseRealization, spec: MollifierSpec, s_nodes) -> np.ndarray:
    """V_{eps,delta}(s_k, x_i) at the nodes ``s_nodes`` and every interior grid x.

    Columns whose spatial support leaves the grid are set to NaN.
    """
    g = noise.grid
    _check_resolution(spec, g)
    timed = time_weights(spec, g, s_nodes) @ noise.increments
    x = g.x_points
    reach = spec.support("x")
    ok = (x - reach >= x[0] - g.dx) & (x + reach <= x[-1] + g.dx)
    w = spec.density("x", x[ok][:, None] - x[None, :])
    w /= w.sum(axis=1, keepdims=True)
    out = np.full((timed.shape[0], g.n), np.nan)
    out[:, ok] = timed @ w.T
    return out


# ---------------------------------------------------------------------------
# Walsh isometry

@dataclass(frozen=True)
class WalshCheck:
    empirical: float
    analytic: float
    stderr: float


def walsh_variance_test(kernel: CorrelationKernel, grid: SpaceTimeGrid, phi, n_seeds: int,
                        seed: int = 0) -> WalshCheck:
    """Compare the sample variance of sum(phi * dW) * dx with the isometry value.

    ``phi`` is an (m, n) array on (t_j, x_i) or a callable ``phi(t, x)``.
    """
    if callable(phi):
        phi = phi(grid.t_points[:-1, None], grid.x_points[None, :])
    phi = np.broadcast_to(np.asarray(phi, dtype=float), (grid.m, grid.n))
    if not np.all(np.isfinite(phi)):
        raise DomainError("test function must be bounded on the grid")
    cov = kernel(grid.x_points[:, None] - grid.x_points[None, :])
    analytic = float(grid.dt * grid.dx**2 * np.einsum("ji,ik,jk->", phi, cov, phi))
    if not np.any(phi):
        return WalshCheck(0.0, analytic, 0.0)

    def block(b, size):
        start = b * 64
        vals = []
        for k in range(start, start + size):
            nz = sample_noise(kernel, grid, seeding.child_seed(seed, "walsh", k))
            vals.append(np.sum(phi * nz.increments) * grid.dx)
        return np.asarray(vals)

    integrals = parallel.map_blocks(block, n_seeds, block=64)
    sq = integrals**2
    return WalshCheck(float(sq.mean()), analytic, float(sq.std(ddof=1) / math.sqrt(n_seeds)))
