"""Fourier-in-y solver.

Transforming the transverse variable turns the model into one complex
parabolic Anderson equation per frequency xi,

    du = nu1 u_xx dt + i xi u dW(t, x),

solved here by Strang splitting: exact heat half-steps on a periodic box via
FFT around the Ito multiplicative update u <- u (1 + i xi dW).  The noise
factor has mean one, so averaging over noise reproduces the heat flow
exactly.  U = exp(-nu2 xi^2 t) u is the transform of theta, recovered by a
trapezoidal inverse transform.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import trapezoid

from . import parallel, seeding
from .errors import DomainError, LowTurbulenceError, TruncationError
from .kernels import CorrelationKernel, ModelParams, bdg_constant
from .noise import SpaceTimeGrid, sample_noise


@dataclass(frozen=True, eq=False)
class ComplexFieldSlice:
    values: np.ndarray
    xi: float
    t: float

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if not np.all(np.isfinite(v)):
            raise DomainError("field slice has non-finite entries")
        object.__setattr__(self, "values", v)


def periodic_grid(half_width: float, n: int, T: float, m: int) -> SpaceTimeGrid:
    """Grid on [-L, L) with n points (the right end is identified with -L)."""
    dx = 2 * half_width / n
    return SpaceTimeGrid(-half_width + dx * np.arange(n), np.linspace(0.0, T, m + 1))


def heat_multiplier(n: int, dx: float, nu1: float, dt: float) -> np.ndarray:
    k = 2 * np.pi * np.fft.fftfreq(n, d=dx)
    return np.exp(-nu1 * k * k * dt)


def _heat(values, mult):
    return np.fft.ifft(np.fft.fft(values, axis=-1) * mult, axis=-1)


def step_values(values, nu1: float, xis, dw_row, dt: float, dx: float, half=None):
    """One split step for a stack of frequencies (rows of ``values``)."""
    if half is None:
        half = heat_multiplier(values.shape[-1], dx, nu1, dt / 2)
    xis = np.asarray(xis, dtype=float).reshape(-1, 1) if np.ndim(values) == 2 else float(xis)
    v = _heat(values, half)
    v = v * (1.0 + 1j * xis * dw_row)
    return _heat(v, half)


def evolve(values, nu1: float, xis, increments, dt: float, dx: float):
    """Apply ``len(increments)`` split steps; adjacent heat half-steps are merged."""
    m = len(increments)
    if m == 0:
        return np.asarray(values, dtype=complex)
    n = np.shape(values)[-1]
    half = heat_multiplier(n, dx, nu1, dt / 2)
    full = half * half
    xis = np.asarray(xis, dtype=float).reshape(-1, 1) if np.ndim(values) == 2 else float(xis)
    vhat = np.fft.fft(values, axis=-1) * half
    for j in range(m):
        if j:
            vhat *= full
        v = np.fft.ifft(vhat, axis=-1)
        v *= 1.0 + 1j * xis * increments[j]
        vhat = np.fft.fft(v, axis=-1)
    return np.fft.ifft(vhat * half, axis=-1)


def step_pam(slc: ComplexFieldSlice, nu1: float, xi: float, dw_row, dt: float, dx: float) -> ComplexFieldSlice:
    if slc.xi != xi:
        raise DomainError("slice frequency does not match xi")
    dw_row = np.asarray(dw_row, dtype=float)
    if dw_row.shape != slc.values.shape:
        raise DomainError("noise row does not match the spatial grid")
    return ComplexFieldSlice(step_values(slc.values, nu1, xi, dw_row, dt, dx), xi, slc.t + dt)


def step_pam_real(X, Y, nu1: float, xi: float, dw_row, dt: float, dx: float):
    """The same step written for (Re u, Im u) as a coupled real system."""
    half = heat_multiplier(X.size, dx, nu1, dt / 2)

    def heat(a):
        return np.fft.ifft(np.fft.fft(a) * half).real

    X, Y = heat(X), heat(Y)
    X, Y = X - xi * Y * dw_row, Y + xi * X * dw_row
    return heat(X), heat(Y)


def attenuate(slc: ComplexFieldSlice, nu2: float) -> ComplexFieldSlice:
    return ComplexFieldSlice(np.exp(-nu2 * slc.xi**2 * slc.t) * slc.values, slc.xi, slc.t)


def xi_grid(radius: float, n_xi: int = 257) -> np.ndarray:
    if n_xi % 2 == 0:
        raise DomainError("use an odd number of frequencies so 0 is included")
    return np.linspace(-radius, radius, n_xi)


def truncation_radius(kappa: float, t: float, mass: float, tol: float = 1e-10) -> float:
    """Smallest R with exp(-kappa R^2 t) * mass < tol."""
    if kappa <= 0 or t <= 0:
        raise DomainError("truncation bound needs kappa > 0 and t > 0")
    return math.sqrt(max(math.log(max(mass, 1e-300) / tol), 0.0) / (kappa * t))


def check_truncation(radius: float, kappa: float, t: float, mass: float, tol: float = 1e-10) -> float:
    tail = math.exp(-kappa * radius**2 * t) * mass
    if tail >= tol:
        raise TruncationError(f"frequency cutoff {radius:g} leaves tail bound {tail:.2e} >= {tol:.0e}")
    return tail


def inverse_fourier(U, xis, ys) -> np.ndarray:
    """theta(y) = (1/2 pi) int exp(-i y xi) U(xi) d xi by the trapezoid rule.

    ``U`` has the frequency axis first (shape (n_xi, ...)); conjugate symmetry
    U(-xi) = conj U(xi) is enforced before transforming.  Returns an array of
    shape (len(ys), ...).
    """
    xis = np.asarray(xis, dtype=float)
    if not np.allclose(xis, -xis[::-1], rtol=0, atol=1e-12 * max(1.0, np.abs(xis).max())):
        raise DomainError("frequency grid must be symmetric about 0")
    U = np.asarray(U, dtype=complex)
    U = 0.5 * (U + np.conj(U[::-1]))
    w = np.full(xis.size, xis[1] - xis[0])
    w[[0, -1]] *= 0.5
    ys = np.asarray(ys, dtype=float)
    phase = np.exp(-1j * np.outer(ys, xis)) * w
    out = np.tensordot(phase, U, axes=(1, 0)) / (2 * np.pi)
    return out.real


def fourier_in_y(profile, xs, xis, y_half_width: float = 12.0, n_y: int = 2401) -> np.ndarray:
    """hat theta0(x, xi) = int exp(i xi y) theta0(x, y) dy, shape (n_xi, n_x)."""
    ys = np.linspace(-y_half_width, y_half_width, n_y)
    vals = profile(np.asarray(xs)[None, :], ys[:, None])          # (n_y, n_x)
    w = np.full(n_y, ys[1] - ys[0])
    w[[0, -1]] *= 0.5
    phase = np.exp(1j * np.outer(xis, ys)) * w                       # (n_xi, n_y)
    return phase @ vals


@dataclass(frozen=True)
class SpectralSetup:
    half_width: float = 8.0
    n_x: int = 64
    n_xi: int = 65
    dt: float = 0.01
    y_half_width: float = 12.0
    tail_tol: float = 1e-10


def spectral_mean_field(profile, params: ModelParams, kernel: CorrelationKernel, t: float,
                        x_probe, y_probe, n_seeds: int, seed: int,
                        setup: SpectralSetup = SpectralSetup()):
    """Mean and standard error of theta(t, x, y) on the probe grid over noise seeds.

    Probe x values must be nodes of the periodic grid.
    """
    if params.kappa <= 0:
        raise LowTurbulenceError("the spectral inversion needs kappa > 0")
    m = int(round(t / setup.dt))
    grid = periodic_grid(setup.half_width, setup.n_x, t, m)
    xs = grid.x_points
    x_probe = np.asarray(x_probe, dtype=float)
    idx = np.rint((x_probe - xs[0]) / grid.dx).astype(int)
    if np.any(np.abs(xs[idx] - x_probe) > 1e-9):
        raise DomainError("probe x values must be grid nodes")
    mass_grid = np.linspace(-setup.y_half_width, setup.y_half_width, 2401)
    mass = float(np.max(trapezoid(np.abs(profile(xs[None, :], mass_grid[:, None])), mass_grid, axis=0)))
    radius = truncation_radius(params.kappa, t, mass, setup.tail_tol)
    check_truncation(radius, params.kappa, t, mass, setup.tail_tol)
    xis = xi_grid(radius, setup.n_xi)
    u0 = fourier_in_y(profile, xs, xis, setup.y_half_width)
    atten = np.exp(-params.nu2 * xis**2 * t)[:, None]

    def one(k):
        nz = sample_noise(kernel, grid, seeding.child_seed(seed, "spectral", k))
        u = evolve(u0, params.nu1, xis, nz.increments, grid.dt, grid.dx)
        U = atten * u[:, idx]
        return inverse_fourier(U, xis, y_probe).T               # (n_xprobe, n_yprobe)

    def block(b, size):
        return np.stack([one(b * 64 + i) for i in range(size)])

    fields = parallel.map_blocks(block, n_seeds, block=64)
    return fields.mean(axis=0), fields.std(axis=0, ddof=1) / math.sqrt(n_seeds)


def second_moment_trajectory(u0, nu1: float, nu2: float, xi: float, kernel: CorrelationKernel,
                             grid: SpaceTimeGrid, n_seeds: int, seed: int):
    """E|U(t_j, x, xi)|^2 over noise seeds, for every grid time.

    Returns (times, second moments with shape (m + 1, n), standard errors).
    """
    u0 = np.asarray(u0, dtype=complex)
    half = heat_multiplier(grid.n, grid.dx, nu1, grid.dt / 2)
    atten = np.exp(-nu2 * xi**2 * grid.t_points)[:, None]

    def one(k):
        nz = sample_noise(kernel, grid, seeding.child_seed(seed, "moment", k))
        out = np.empty((grid.m + 1, grid.n))
        u = u0
        out[0] = np.abs(u) ** 2
        for j in range(grid.m):
            u = step_values(u, nu1, xi, nz.increments[j], grid.dt, grid.dx, half)
            out[j + 1] = np.abs(u) ** 2
        return out * atten**2

    def block(b, size):
        return np.stack([one(b * 64 + i) for i in range(size)])

    sq = parallel.map_blocks(block, n_seeds, block=64)
    return grid.t_points, sq.mean(axis=0), sq.std(axis=0, ddof=1) / math.sqrt(n_seeds)


@dataclass(frozen=True)
class MomentBoundReport:
    k: float
    eps: float
    bound: np.ndarray
    estimate: np.ndarray
    within: np.ndarray
    fitted_rate: float
    fitted_rate_stderr: float
    asymptotic_rate: float

    @property
    def ok(self) -> bool:
        return bool(np.all(self.within))


def moment_bound(nu2, xi, rho0, eps, times, sup_u0_moment, k=2):
    """eps^-k exp(-k [nu2 - c_k rho0 / (2 (1 - eps)^2)] xi^2 t) sup E|U_0|^k."""
    if not 0 < eps < 1:
        raise DomainError("eps must lie in (0, 1)")
    c = bdg_constant(k)
    rate = -k * (nu2 - c * rho0 / (2 * (1 - eps) ** 2)) * xi**2
    with np.errstate(over="ignore"):  # an infinite bound is vacuous, not an error
        return eps ** (-k) * np.exp(rate * np.asarray(times)) * sup_u0_moment


def fit_rate(times, values, stderr=None):
    """Weighted least-squares slope of log(values) against t; returns (rate, stderr)."""
    times = np.asarray(times, dtype=float)
    y = np.log(np.asarray(values, dtype=float))
    w = None
    if stderr is not None:
        rel = np.asarray(stderr, dtype=float) / np.asarray(values, dtype=float)
        w = 1.0 / np.maximum(rel, 1e-12)
    coef, cov = np.polyfit(times, y, 1, w=w, cov="unscaled" if w is not None else True)
    return float(coef[0]), float(math.sqrt(max(cov[0, 0], 0.0)))


def moment_bound_check(nu2, xi, kernel: CorrelationKernel, eps, times, estimates, sup_u0_moment,
                       stderr=None, k=2, slack=1.1) -> MomentBoundReport:
    """Compare estimated E|U|^k with the a priori bound at every sampled time.

    A time passes when ``estimate - 3 * stderr <= slack * bound``.
    """
    times = np.asarray(times, dtype=float)
    est = np.asarray(estimates, dtype=float)
    se = np.zeros_like(est) if stderr is None else np.asarray(stderr, dtype=float)
    bound = moment_bound(nu2, xi, kernel.rho0, eps, times, sup_u0_moment, k)
    within = est - 3 * se <= slack * bound
    pos = est > 0
    if pos.sum() >= 2 and np.ptp(times[pos]) > 0:
        rate, rate_se = fit_rate(times[pos], est[pos], se[pos] if stderr is not None else None)
    else:
        rate, rate_se = math.nan, math.nan
    return MomentBoundReport(k, eps, bound, est, within, rate, rate_se,
                             -k * (nu2 - bdg_constant(k) * kernel.rho0 / 2) * xi**2)
