"""Vanishing-viscosity behaviour.

* For bounded initial data the Stratonovich solution tends, as nu -> 0, to
  the method-of-characteristics value theta0(x, y - int_0^t V(s, x) ds).
* E[Gamma_t(x, y)] / p_t^nu(x) = p_t^(nu + rho0/2)(y) exactly, so the ratio
  tends to p_t^(rho0/2)(y), while E[Gamma_t(0, y)] itself blows up like
  nu^-1/2 and E[Gamma_t(x, y)] -> 0 for x != 0.
* E[(Gamma/p)(x, y) (Gamma/p)(x', y')] tends to the mean of a bivariate
  normal density whose correlation is the random bridge functional K~.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import seeding
from .curvilinear import sample_grid_batch, ktilde_samples
from .errors import DegenerateKernelError, DomainError, UnsupportedKernelError
from .kernels import CorrelationKernel, heat_kernel
from .noise import NoiseRealization
from .solver_fk import InitialProfile, Mode, ModelParams, ScalarEstimate, Variant, draw_shifts, gamma_field

REJECT_GAP = 1e-12


# ---------------------------------------------------------------------------
# inviscid limit for function data

def characteristics_value(profile: InitialProfile, noise: NoiseRealization, t: float, x: float, y):
    """theta0(x, y - int_0^t V(s, x) ds) on the noise grid."""
    tp = noise.grid.t_points[: noise.grid.t_index(t) + 1]
    y0 = sample_grid_batch(noise, x, np.zeros((1, tp.size)), t)[0]
    return profile(x, np.asarray(y, dtype=float) - y0)


@dataclass(frozen=True)
class InviscidDistance:
    nu: float
    distance: float
    stderr: float


def inviscid_distance(profile: InitialProfile, kernel: CorrelationKernel, nu: float, point, noises,
                      n_paths: int, seed: int, ys=None) -> InviscidDistance:
    """L2 distance (over ``ys`` and the noise realizations) to the characteristics value.

    ``point`` is (t, x).  The Monte Carlo variance of each estimate is
    subtracted from its squared error, so the result targets the distance of
    the exact solutions rather than that of the estimates.
    """
    if profile.variant is Variant.DIRAC or not math.isfinite(profile.bound):
        raise DomainError("inviscid limit needs bounded function data")
    t, x = float(point[0]), float(point[1])
    ys = np.linspace(-2.0, 2.0, 9) if ys is None else np.asarray(ys, dtype=float)
    params = ModelParams.stratonovich(nu, kernel.rho0)
    noises = [noises] if isinstance(noises, NoiseRealization) else list(noises)
    per_noise = []
    for r, noise in enumerate(noises):
        dx, dy = draw_shifts(params, kernel, t, x, n_paths, seeding.child_seed(seed, "inviscid", r),
                             Mode.CONDITIONAL, noise)
        vals = profile(x + dx[None, :], ys[:, None] + dy[None, :])
        est = vals.mean(axis=1)
        var = vals.var(axis=1, ddof=1) / n_paths if n_paths > 1 else np.zeros(ys.size)
        err2 = (est - characteristics_value(profile, noise, t, x, ys)) ** 2 - var
        per_noise.append(err2.mean())
    per_noise = np.asarray(per_noise)
    d2 = float(per_noise.mean())
    dist = math.sqrt(max(d2, 0.0))
    se2 = float(per_noise.std(ddof=1) / math.sqrt(per_noise.size)) if per_noise.size > 1 else 0.0
    se = se2 / (2 * dist) if dist > 0 else math.sqrt(se2)
    return InviscidDistance(nu, dist, se)


# ---------------------------------------------------------------------------
# mean of Gamma

def gamma_mean_ratio(nu: float, rho0: float, t: float, y):
    """E[Gamma_t(x, y)] / p_t^nu(x) = p_t^(nu + rho0/2)(y), for every x."""
    return heat_kernel(nu + rho0 / 2, t, y)


def gamma_mean(nu: float, rho0: float, t: float, x, y):
    return heat_kernel(nu, t, x) * gamma_mean_ratio(nu, rho0, t, y)


def gamma_mean_limit(kernel: CorrelationKernel, t: float, x: float, y: float, nu_sequence,
                     n_bridges: int = 0, seed: int = 0):
    """Rows (nu, analytic, mc_estimate, stderr, limit) for E[Gamma]/p_t^nu(x).

    The Monte Carlo column is skipped (NaN) when ``n_bridges`` is 0.
    """
    if not t > 0:
        raise DomainError("t must be positive")
    limit = float(heat_kernel(kernel.rho0 / 2, t, y))
    rows = []
    for i, nu in enumerate(nu_sequence):
        analytic = float(gamma_mean_ratio(nu, kernel.rho0, t, y))
        mc = se = math.nan
        if n_bridges:
            est = gamma_field(nu, kernel, (t, x, y), n_bridges, seeding.child_seed(seed, "gamma-mean", i))
            p = float(heat_kernel(nu, t, x))
            mc, se = est.value / p, est.stderr / p
        rows.append({"nu": float(nu), "analytic": analytic, "mc_estimate": mc, "stderr": se, "limit": limit})
    return rows


@dataclass(frozen=True)
class Dichotomy:
    rows: list
    exponent: float  # slope of log E[Gamma_t(0, y)] against log nu
    exponent_stderr: float


def gamma_mean_dichotomy(kernel: CorrelationKernel, t: float, y: float, nu_sequence, xs=(0.0, 1.0),
                         n_bridges: int = 0, seed: int = 0) -> Dichotomy:
    """E[Gamma_t(x, y)] along ``nu_sequence`` for each x in ``xs``, plus the x=0 exponent fit."""
    nus = np.asarray(list(nu_sequence), dtype=float)
    rows = []
    for x in xs:
        for i, nu in enumerate(nus):
            analytic = float(gamma_mean(nu, kernel.rho0, t, x, y))
            mc = se = math.nan
            if n_bridges:
                est = gamma_field(nu, kernel, (t, x, y), n_bridges, seeding.child_seed(seed, "dichotomy", i))
                mc, se = est.value, est.stderr
            rows.append({"nu": float(nu), "x": float(x), "analytic": analytic, "mc_estimate": mc,
                         "stderr": se})
    at0 = np.array([gamma_mean(nu, kernel.rho0, t, 0.0, y) for nu in nus])
    coef, cov = np.polyfit(np.log(nus), np.log(at0), 1, cov=True) if nus.size > 2 else (
        np.polyfit(np.log(nus), np.log(at0), 1), np.zeros((2, 2)))
    return Dichotomy(rows, float(coef[0]), float(math.sqrt(max(cov[0, 0], 0.0))))


# ---------------------------------------------------------------------------
# covariance of Gamma / p and negative moments of 1 - K~

def _check_kernel(kernel: CorrelationKernel, x: float, x_prime: float):
    if kernel.is_constant:
        raise UnsupportedKernelError("K~ is identically 1 for a constant kernel; the limit is undefined")
    if not kernel.monotone_on_halfline:
        raise DomainError("kernel must be non-increasing on [0, inf)")
    if x == x_prime and not kernel.strictly_peaked:
        raise DomainError("x = x' needs a kernel strictly peaked at 0")


@dataclass(frozen=True)
class CovLimit:
    estimate: ScalarEstimate
    rejected: int
    rejection_rate: float
    speed: float


def _filtered_k(kernel, t, x, x_prime, speed, n_pairs, seed):
    k = ktilde_samples(kernel, t, x, x_prime, speed, n_pairs, seed, antithetic=False)
    keep = k < 1.0 - REJECT_GAP
    return k[keep], int(np.count_nonzero(~keep))


def bivariate_limit_density(k, t: float, rho0: float, y: float, y_prime: float):
    """(2 pi t rho0 sqrt(1-K^2))^-1 exp(-(y^2 + y'^2 - 2 y y' K) / (2 t rho0 (1 - K^2)))."""
    k = np.asarray(k, dtype=float)
    one_m = 1.0 - k * k
    v = t * rho0
    return np.exp(-(y * y + y_prime * y_prime - 2 * y * y_prime * k) / (2 * v * one_m)) / (
        2 * math.pi * v * np.sqrt(one_m))


def gamma_cov_limit(kernel: CorrelationKernel, t: float, x: float, x_prime: float, y: float, y_prime: float,
                    nu_small: float, n_bridge_pairs: int, seed: int, speed: float | None = None) -> CovLimit:
    """Monte Carlo over bridge pairs of the nu -> 0 limit of E[(Gamma/p)(x,y) (Gamma/p)(x',y')].

    Bridges run at ``speed`` (default 2 nu_small).  Draws with K~ within
    1e-12 of 1 are rejected and counted.
    """
    _check_kernel(kernel, x, x_prime)
    speed = 2 * nu_small if speed is None else float(speed)
    k, rejected = _filtered_k(kernel, t, x, x_prime, speed, n_bridge_pairs, seeding.child_seed(seed, "cov-limit"))
    vals = bivariate_limit_density(k, t, kernel.rho0, y, y_prime)
    est = ScalarEstimate.from_samples(vals, Mode.UNCONDITIONAL, (t, x, y), keep=False)
    return CovLimit(est, rejected, rejected / n_bridge_pairs, speed)


def gamma_cov_direct(kernel: CorrelationKernel, t: float, x: float, x_prime: float, y: float, y_prime: float,
                     nu: float, n_bridge_pairs: int, seed: int) -> ScalarEstimate:
    """Direct estimate of E[(Gamma/p)(x,y) (Gamma/p)(x',y')] at viscosity nu.

    Given the bridges, the curvilinear integrals at x and x' are jointly
    normal with variance t rho0 and correlation K~; they are sampled and the
    two heat kernels p_t^nu evaluated.
    """
    _check_kernel(kernel, x, x_prime)
    k = ktilde_samples(kernel, t, x, x_prime, 2 * nu, n_bridge_pairs, seeding.child_seed(seed, "cov-direct"),
                       antithetic=False)
    gen = seeding.rng(seed, "cov-direct", "joint")
    z1, z2 = gen.standard_normal((2, k.size))
    s = math.sqrt(t * kernel.rho0)
    y1 = s * z1
    y2 = s * (k * z1 + np.sqrt(np.maximum(1 - k * k, 0.0)) * z2)
    vals = heat_kernel(nu, t, y - y1) * heat_kernel(nu, t, y_prime - y2)
    return ScalarEstimate.from_samples(vals, Mode.UNCONDITIONAL, (t, x, y), keep=False)


@dataclass(frozen=True)
class TailReport:
    histogram: tuple  # (counts, bin_edges) of 1 - K~ on a log scale
    tail_r: np.ndarray
    tail_prob: np.ndarray
    tail_slope: float  # slope of log P{1 - K~ < r} against 1/r
    moment: float  # E[(1 - K~)^-order] at n_pairs
    moment_doubled: float  # same at 2 n_pairs
    relative_change: float
    stabilized: bool
    rejected: int
    order: int


def negative_moment_probe(kernel: CorrelationKernel, t: float, x: float, x_prime: float, n_pairs: int,
                          seed: int, speed: float = 2.0, order: int = 2, tol: float = 0.05) -> TailReport:
    """Soft diagnostic for the lower tail of 1 - K~.

    Reports the empirical tail and checks whether E[(1 - K~)^-order]
    changes by less than ``tol`` (relative) when the sample size doubles.
    It does not and cannot prove finiteness of the moment.
    """
    if kernel.is_constant:
        raise DegenerateKernelError("K~ is identically 1 for a constant kernel")
    _check_kernel(kernel, x, x_prime)
    k1, rej1 = _filtered_k(kernel, t, x, x_prime, speed, n_pairs, seeding.child_seed(seed, "negmom", 1))
    k2, rej2 = _filtered_k(kernel, t, x, x_prime, speed, 2 * n_pairs, seeding.child_seed(seed, "negmom", 2))
    gap = 1.0 - k2
    m1 = float(np.mean((1.0 - k1) ** -order))
    m2 = float(np.mean(gap ** -order))
    rel = abs(m2 - m1) / abs(m2)
    lo = max(gap.min(), 1e-16)
    edges = np.geomspace(lo, max(gap.max(), lo * 10), 41)
    hist = np.histogram(gap, bins=edges)
    r = np.quantile(gap, [0.001, 0.003, 0.01, 0.03, 0.1])
    p = np.array([np.mean(gap < ri) for ri in r])
    ok = p > 0
    slope = float(np.polyfit(1.0 / r[ok], np.log(p[ok]), 1)[0]) if ok.sum() >= 2 else math.nan
    return TailReport(hist, r, p, slope, m1, m2, rel, rel < tol, rej1 + rej2, order)
