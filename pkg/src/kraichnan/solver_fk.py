"""Feynman-Kac Monte Carlo for the Kraichnan model.

The Ito/Walsh solution with diffusivities (nu1, nu2) is

    theta(t, x, y) = E[theta0(x + B_t, y + Bbar_t + mu t - Y) | noise]

with Var(B_1) = 2 nu1, Var(Bbar_1) = 2 kappa, kappa = nu2 - rho(0)/2, and Y the
curvilinear integral of the velocity along x + B_{t-s}.  The Stratonovich
solution is the same formula at nu1 = nu, nu2 = nu + rho(0)/2.

Two sampling modes:

* ``UNCONDITIONAL``: Y is drawn per path from its exact conditional law
  N(0, t rho(0)), so the estimate targets the unconditional mean E[theta].
* ``CONDITIONAL``: Y is a Riemann sum against one fixed noise realization
  shared by every path, so the estimate is one trajectory of theta.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate, optimize
from scipy.interpolate import RegularGridInterpolator
from scipy.signal import fftconvolve

from . import parallel, seeding
from .curvilinear import sample_grid_batch
from .errors import DomainError, LowTurbulenceError, OutOfDomainError, UnsupportedKernelError
from .kernels import CorrelationKernel, ModelParams, heat_kernel
from .noise import NoiseRealization
from .paths import bridge_values, standard_paths


class Mode(str, enum.Enum):
    UNCONDITIONAL = "unconditional"
    CONDITIONAL = "conditional"


class Variant(str, enum.Enum):
    FUNCTION = "function"
    DIRAC = "dirac"
    GAUSSIAN_STRIP = "gaussian_strip"


@dataclass(frozen=True, eq=False)
class InitialProfile:
    """Initial data theta0.

    ``FUNCTION`` wraps a vectorized callable ``f(x, y)`` with sup bound
    ``bound`` and Holder exponents (alpha in x, zeta in y).  ``GAUSSIAN_STRIP``
    is theta0(x, y) = p_1^(kappa)(y).  ``DIRAC`` is the point mass at the origin.
    """

    variant: Variant
    func: Callable | None = None
    bound: float = math.inf
    alpha: float = 1.0
    zeta: float = 1.0
    kappa: float | None = None

    @classmethod
    def function(cls, f, bound, alpha=1.0, zeta=1.0) -> InitialProfile:
        return cls(Variant.FUNCTION, f, float(bound), alpha, zeta)

    @classmethod
    def constant(cls, c) -> InitialProfile:
        c = float(c)
        return cls(Variant.FUNCTION, lambda x, y: np.full(np.broadcast(x, y).shape, c), abs(c))

    @classmethod
    def gaussian_strip(cls, kappa) -> InitialProfile:
        kappa = float(kappa)
        if not kappa > 0:
            raise DomainError("strip profile needs kappa > 0")
        return cls(Variant.GAUSSIAN_STRIP, lambda x, y: heat_kernel(kappa, 1.0, y) + 0.0 * x,
                   1.0 / math.sqrt(4 * math.pi * kappa), 1.0, 1.0, kappa)

    @classmethod
    def dirac(cls) -> InitialProfile:
        return cls(Variant.DIRAC)

    def __call__(self, x, y):
        if self.variant is Variant.DIRAC:
            raise DomainError("point-mass data has no pointwise values; use gamma_field")
        out = np.asarray(self.func(np.asarray(x, dtype=float), np.asarray(y, dtype=float)), dtype=float)
        if np.isfinite(self.bound) and np.any(np.abs(out) > self.bound * (1 + 1e-12)):
            raise DomainError("profile exceeds its declared bound")
        return out


@dataclass(frozen=True)
class ScalarEstimate:
    value: float
    stderr: float
    n_samples: int
    mode: Mode
    point: tuple
    samples: np.ndarray | None = field(default=None, repr=False, compare=False)

    @classmethod
    def from_samples(cls, samples, mode, point, keep=True) -> ScalarEstimate:
        samples = np.asarray(samples, dtype=float)
        n = samples.size
        se = float(samples.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
        return cls(float(samples.mean()), se, n, Mode(mode), tuple(point), samples if keep else None)


# ---------------------------------------------------------------------------
# sampling the characteristic shifts

def _time_grid(t, noise, steps=64):
    if noise is not None:
        k = noise.grid.t_index(t)
        return noise.grid.t_points[: k + 1]
    return np.linspace(0.0, t, steps + 1)


def draw_shifts(params: ModelParams, kernel: CorrelationKernel, t: float, x: float,
                n_samples: int, seed: int, mode=Mode.UNCONDITIONAL,
                noise: NoiseRealization | None = None):
    """Per-sample shifts (dx, dy) so that each sample is theta0(x + dx, y + dy).

    dx = B_t and dy = Bbar_t + mu t - Y.  Standard normals are drawn first and
    scaled afterwards, so runs at different diffusivities with the same seed
    are coupled draw for draw.
    """
    mode = Mode(mode)
    _check_ito(params, kernel)
    if mode is Mode.CONDITIONAL and noise is None:
        raise DomainError("conditional mode needs a noise realization")
    if mode is Mode.CONDITIONAL and noise.kernel != kernel:
        raise DomainError("noise was sampled for a different kernel")
    tp = _time_grid(t, noise if mode is Mode.CONDITIONAL else None)
    s_b = math.sqrt(2 * params.nu1)
    s_bar = math.sqrt(2 * params.kappa * t)
    s_y = math.sqrt(t * kernel.rho0)

    def block(b, size):
        gen = seeding.rng(seed, "fk", b)
        if mode is Mode.CONDITIONAL:
            paths = s_b * standard_paths(gen, tp, size)
            bt = paths[:, -1]
            y = sample_grid_batch(noise, x, paths, t)
            bbar = s_bar * gen.standard_normal(size)
        else:
            bt = s_b * math.sqrt(t) * gen.standard_normal(size)
            bbar = s_bar * gen.standard_normal(size)
            y = s_y * gen.standard_normal(size)
        return np.stack([bt, bbar + params.mu * t - y], axis=1)

    out = parallel.map_blocks(block, n_samples)
    return out[:, 0], out[:, 1]


def _check_ito(params: ModelParams, kernel: CorrelationKernel):
    if abs(params.rho0 - kernel.rho0) > 1e-12 * kernel.rho0:
        raise DomainError("params.rho0 does not match the kernel")
    if params.kappa <= 0:
        raise LowTurbulenceError(
            f"Ito mode needs nu2 > rho(0)/2 (kappa = {params.kappa:g})")


def solve_ito(profile: InitialProfile, params: ModelParams, kernel: CorrelationKernel, point,
              n_samples: int, seed: int, mode=Mode.UNCONDITIONAL,
              noise: NoiseRealization | None = None) -> ScalarEstimate:
    """Monte Carlo estimate of the Ito/Walsh solution at ``point = (t, x, y)``."""
    _check_ito(params, kernel)
    if profile.variant is Variant.DIRAC:
        raise DomainError("point-mass data is handled by gamma_field")
    t, x, y = (float(v) for v in point)
    if t < 0:
        raise DomainError("t must be nonnegative")
    if t == 0:
        v = float(profile(x, y))
        return ScalarEstimate(v, 0.0, n_samples, Mode(mode), (t, x, y), np.full(n_samples, v))
    dx, dy = draw_shifts(params, kernel, t, x, n_samples, seed, mode, noise)
    return ScalarEstimate.from_samples(profile(x + dx, y + dy), mode, (t, x, y))


def solve_stratonovich(profile: InitialProfile, nu: float, kernel: CorrelationKernel, point,
                       n_samples: int, seed: int, mode=Mode.UNCONDITIONAL,
                       noise: NoiseRealization | None = None) -> ScalarEstimate:
    """Stratonovich solution: the Ito solution at nu1 = nu, nu2 = nu + rho(0)/2."""
    if not nu > 0:
        raise DomainError("nu must be positive")
    if profile.variant is Variant.DIRAC:
        return gamma_field(nu, kernel, point, n_samples, seed, mode, noise)
    return solve_ito(profile, ModelParams.stratonovich(nu, kernel.rho0), kernel, point,
                     n_samples, seed, mode, noise)


# ---------------------------------------------------------------------------
# conditional profiles in y

def profile_in_y(profile: InitialProfile, x: float, dx, dy):
    """The estimate y -> mean_k theta0(x + dx_k, y + dy_k) for fixed draws."""
    dx = np.asarray(dx)
    dy = np.asarray(dy)

    def f(y):
        y = np.atleast_1d(np.asarray(y, dtype=float))
        vals = profile(x + dx[None, :], y[:, None] + dy[None, :])
        return vals.mean(axis=1)

    return f


def y_mass(f, center: float, half_width: float, tol: float = 1e-6) -> float:
    """int f(y) dy over [center - half_width, center + half_width] (adaptive)."""
    val, _ = integrate.quad(lambda y: float(f(y)[0]), center - half_width, center + half_width,
                            epsabs=tol, epsrel=0.0, limit=500)
    return float(val)


def sup_in_y(f, y_lo: float, y_hi: float, n_grid: int = 401) -> tuple[float, float]:
    """(argmax, max) of f over [y_lo, y_hi]: grid scan then bounded refinement."""
    ys = np.linspace(y_lo, y_hi, n_grid)
    vals = f(ys)
    k = int(np.argmax(vals))
    lo, hi = ys[max(k - 1, 0)], ys[min(k + 1, n_grid - 1)]
    res = optimize.minimize_scalar(lambda y: -float(f(y)[0]), bounds=(lo, hi), method="bounded",
                                   options={"xatol": 1e-10 * max(1.0, abs(ys[k]))})
    if -res.fun >= vals[k]:
        return float(res.x), float(-res.fun)
    return float(ys[k]), float(vals[k])


# ---------------------------------------------------------------------------
# the fundamental solution Gamma

def gamma_shifts(nu: float, kernel: CorrelationKernel, t: float, x: float, n_bridges: int,
                 seed: int, mode=Mode.UNCONDITIONAL, noise: NoiseRealization | None = None):
    """Curvilinear integrals along x + B^{(t,-x)}_{t-s}, one per bridge.

    In unconditional mode the law given any bridge is N(0, t rho0), so no
    bridge needs to be materialized.
    """
    mode = Mode(mode)
    if mode is Mode.CONDITIONAL and noise is None:
        raise DomainError("conditional mode needs a noise realization")
    s = math.sqrt(2 * nu)

    def block(b, size):
        gen = seeding.rng(seed, "gamma", b)
        if mode is Mode.UNCONDITIONAL:
            return math.sqrt(t * kernel.rho0) * gen.standard_normal(size)
        tp = _time_grid(t, noise)
        bridges = bridge_values(s * standard_paths(gen, tp, size), tp, t, -x)
        return sample_grid_batch(noise, x, bridges, t)

    return parallel.map_blocks(block, n_bridges)


def gamma_field(nu: float, kernel: CorrelationKernel, point, n_bridges: int, seed: int,
                mode=Mode.UNCONDITIONAL, noise: NoiseRealization | None = None) -> ScalarEstimate:
    """Gamma_t(x, y) = p_t(x) * E[p_t(y - Y) | noise], averaged over bridges."""
    t, x, y = (float(v) for v in point)
    if not nu > 0:
        raise DomainError("nu must be positive")
    if not t > 0:
        raise DomainError("Gamma needs t > 0")
    ys = gamma_shifts(nu, kernel, t, x, n_bridges, seed, mode, noise)
    samples = heat_kernel(nu, t, x) * heat_kernel(nu, t, y - ys)
    return ScalarEstimate.from_samples(samples, mode, (t, x, y))


def gamma_closed_form(nu: float, kernel, w_t, t: float, x, y):
    """Constant-kernel Gamma: p_t(x) p_t(y - sqrt(rho0) W_t).  ``kernel`` may be rho0."""
    if isinstance(kernel, CorrelationKernel):
        if not kernel.is_constant:
            raise UnsupportedKernelError("closed form holds only for a constant kernel")
        rho0 = kernel.rho0
    else:
        rho0 = float(kernel)
    return heat_kernel(nu, t, x) * heat_kernel(nu, t, np.asarray(y) - math.sqrt(rho0) * np.asarray(w_t))


def gamma_grid(nu: float, kernel: CorrelationKernel, t: float, xs, ys, n_bridges: int, seed: int,
               mode=Mode.CONDITIONAL, noise: NoiseRealization | None = None):
    """Gamma_t on the tensor grid ``xs`` x ``ys``; returns (values, stderr)."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    vals = np.empty((xs.size, ys.size))
    errs = np.empty_like(vals)
    for i, x in enumerate(xs):
        shifts = gamma_shifts(nu, kernel, t, x, n_bridges, seed, mode, noise)
        s = heat_kernel(nu, t, x) * heat_kernel(nu, t, ys[:, None] - shifts[None, :])
        vals[i] = s.mean(axis=1)
        errs[i] = s.std(axis=1, ddof=1) / math.sqrt(n_bridges)
    return vals, errs


def convolve_profile(mu, gamma_values, xs, ys, edge_tol=1e-8):
    """G_mu = mu * Gamma_t on the grid (xs, ys) where Gamma_t was sampled.

    ``mu`` is either a list of atoms ``(weight, a, b)`` or an InitialProfile
    used as a density.  Gamma_t is extended by zero off the grid, so its values
    on the grid boundary must be negligible (< ``edge_tol`` times the peak).
    Atoms are applied by bilinear interpolation; densities by discrete
    convolution, which needs uniform grids symmetric about zero.
    """
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    g = np.asarray(gamma_values, dtype=float)
    edge = max(np.abs(g[0]).max(), np.abs(g[-1]).max(), np.abs(g[:, 0]).max(), np.abs(g[:, -1]).max())
    if edge > edge_tol * np.abs(g).max():
        raise OutOfDomainError("Gamma is not negligible on the grid boundary; widen the grid")
    if isinstance(mu, InitialProfile) and mu.variant is Variant.DIRAC:
        mu = [(1.0, 0.0, 0.0)]
    if isinstance(mu, InitialProfile):
        dx, dy = xs[1] - xs[0], ys[1] - ys[0]
        if abs(xs[0] + xs[-1]) > 1e-9 * dx or abs(ys[0] + ys[-1]) > 1e-9 * dy:
            raise OutOfDomainError("density convolution needs grids symmetric about 0")
        if xs.size % 2 == 0 or ys.size % 2 == 0:
            raise OutOfDomainError("density convolution needs an odd number of nodes per axis")
        dens = mu(xs[:, None], ys[None, :])
        return fftconvolve(dens, g, mode="same") * dx * dy
    interp = RegularGridInterpolator((xs, ys), g, bounds_error=False, fill_value=0.0)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    out = np.zeros_like(g)
    for w, a, b in mu:
        out += w * interp(np.stack([X - a, Y - b], axis=-1))
    return out
