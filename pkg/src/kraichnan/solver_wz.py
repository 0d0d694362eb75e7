"""Wong-Zakai approximations: the model driven by mollified noise.

With V replaced by the smooth field V_{eps,delta} the equation is classical,
and its solution has the path representation

    theta_{eps,delta}(t, x, y) = E[theta0(x + X_t, y + X'_t - Y_{eps,delta}) | noise]

where X, X' are independent Brownian motions of speed 2 nu and
Y_{eps,delta} = int_0^t V_{eps,delta}(s, x + X_{t-s}) ds.  As eps, delta -> 0
this converges to the Stratonovich solution, i.e. the Ito solution with
nu2 = nu + rho(0)/2.

Paths are drawn from the same streams for every mollifier level and for the
unmollified reference, so level-to-level differences are common-random-number
differences.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import OptimizeWarning, curve_fit

from . import _accel, seeding
from .curvilinear import sample_grid_batch
from .errors import DomainError, OutOfDomainError, ResolutionError
from .kernels import CorrelationKernel, heat_kernel
from .noise import MollifierShape, MollifierSpec, NoiseRealization, SpaceTimeGrid, mollified_field, sample_noise
from .paths import standard_paths
from .solver_fk import InitialProfile, Mode, ScalarEstimate, Variant


def _trapezoid_weights(tp):
    w = np.empty(tp.size)
    d = np.diff(tp)
    w[0], w[-1] = d[0] / 2, d[-1] / 2
    w[1:-1] = 0.5 * (d[:-1] + d[1:])
    return w


def mollified_curvilinear(noise: NoiseRealization, spec: MollifierSpec, x: float, paths, t: float):
    """Y_{eps,delta} for each path by trapezoid quadrature on the path grid."""
    g = noise.grid
    k = g.t_index(t)
    if g.T < t + spec.support("t") - 1e-12:
        raise ResolutionError("noise horizon must extend past t by the time-mollifier support")
    tp = g.t_points[: k + 1]
    field = mollified_field(noise, spec, tp)
    pos = x + np.asarray(paths, dtype=float)[:, ::-1]
    # NaN columns are where the spatial mollifier would leave the grid
    valid = np.isfinite(field[0])
    lo, hi = g.x_points[valid][0], g.x_points[valid][-1]
    if pos.min() < lo or pos.max() > hi:
        raise OutOfDomainError("path entered the grid margin reserved for the mollifier")
    weighted = np.ascontiguousarray(np.nan_to_num(field) * _trapezoid_weights(tp)[:, None])
    return _accel.curvilinear_sum(weighted, float(g.x_points[0]), float(g.dx), np.ascontiguousarray(pos))


def _draw(seed, tp, n_paths, nu, *tag):
    gen = seeding.rng(seed, "wz", *tag)
    s = math.sqrt(2 * nu)
    paths = s * standard_paths(gen, tp, n_paths)
    other = s * math.sqrt(tp[-1]) * gen.standard_normal(n_paths)
    return paths, other


def solve_mollified(profile: InitialProfile, nu: float, kernel: CorrelationKernel, spec: MollifierSpec,
                    noise: NoiseRealization, point, n_paths: int, seed: int) -> ScalarEstimate:
    """Monte Carlo estimate of theta_{eps,delta}(t, x, y) for one noise realization."""
    if profile.variant is Variant.DIRAC:
        raise DomainError("point-mass data is not supported by the mollified solver")
    if noise.kernel != kernel:
        raise DomainError("noise was sampled for a different kernel")
    t, x, y = (float(v) for v in point)
    tp = noise.grid.t_points[: noise.grid.t_index(t) + 1]
    paths, other = _draw(seed, tp, n_paths, nu, "paths")
    ys = mollified_curvilinear(noise, spec, x, paths, t)
    return ScalarEstimate.from_samples(profile(x + paths[:, -1], y + other - ys), Mode.CONDITIONAL, (t, x, y))


def solve_reference(profile: InitialProfile, nu: float, kernel: CorrelationKernel, noise: NoiseRealization,
                    point, n_paths: int, seed: int) -> ScalarEstimate:
    """Stratonovich solution on the same paths as ``solve_mollified`` (grid curvilinear sums)."""
    t, x, y = (float(v) for v in point)
    tp = noise.grid.t_points[: noise.grid.t_index(t) + 1]
    paths, other = _draw(seed, tp, n_paths, nu, "paths")
    ys = sample_grid_batch(noise, x, paths, t)
    return ScalarEstimate.from_samples(profile(x + paths[:, -1], y + other - ys), Mode.CONDITIONAL, (t, x, y))


def default_sequence(eps0: float, delta0: float, levels: int = 5, shape=MollifierShape.HEAT, nu: float = 1.0):
    return [MollifierSpec(shape, eps0 * 2.0**-k, delta0 * 2.0**-k, nu) for k in range(levels)]


@dataclass(frozen=True)
class DriftReport:
    nu2: float
    stderr: float
    residual: float
    ok: bool
    variance: float


def fit_effective_nu2(ys, mean_field, stderr, t: float, profile_var: float, tol: float = 0.05) -> DriftReport:
    """Fit a Gaussian density to the mean field in y and read off nu2.

    The mean field of a strip profile with y-variance ``profile_var`` is a
    Gaussian of variance profile_var + 2 nu2 t.  ``ok`` is False when the
    largest residual exceeds ``tol`` times the peak (non-Gaussian shape).
    """
    def model(y, var, center):
        return np.exp(-(y - center) ** 2 / (2 * var)) / np.sqrt(2 * np.pi * var)

    guess = float(np.sum(ys**2 * mean_field) / np.sum(mean_field))
    sigma = np.maximum(np.asarray(stderr, dtype=float), 1e-12)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", OptimizeWarning)
            popt, pcov = curve_fit(model, ys, mean_field, p0=[max(guess, 1e-3), 0.0], sigma=sigma,
                                   absolute_sigma=True)
    except RuntimeError:
        return DriftReport(math.nan, math.nan, math.inf, False, math.nan)
    var = float(popt[0])
    resid = float(np.max(np.abs(model(ys, *popt) - mean_field)) / np.max(mean_field))
    nu2 = (var - profile_var) / (2 * t)
    se = math.sqrt(max(pcov[0, 0], 0.0)) / (2 * t) if np.isfinite(pcov[0, 0]) else math.nan
    return DriftReport(nu2, se, resid, resid <= tol, var)


def fit_fields(fields, ys, t: float, profile_var: float, n_batches: int = 10) -> DriftReport:
    """Fit the mean of per-realization fields (rows) and estimate the stderr of nu2 by batch refits.

    Rows share no randomness, so the spread of fits over disjoint batches is
    an honest error bar; the curve-fit covariance ignores correlation across y.
    """
    fields = np.asarray(fields, dtype=float)
    r = fields.shape[0]
    mean = fields.mean(axis=0)
    se_y = fields.std(axis=0, ddof=1) / math.sqrt(r) if r > 1 else np.full(mean.shape, 1e-12)
    rep = fit_effective_nu2(ys, mean, se_y, t, profile_var)
    if r < 2 * n_batches:
        return rep
    fits = []
    for chunk in np.array_split(fields, n_batches):
        c_se = chunk.std(axis=0, ddof=1) / math.sqrt(chunk.shape[0])
        fits.append(fit_effective_nu2(ys, chunk.mean(axis=0), c_se, t, profile_var).nu2)
    fits = np.asarray(fits)
    fits = fits[np.isfinite(fits)]
    se = float(fits.std(ddof=1) / math.sqrt(fits.size)) if fits.size > 1 else rep.stderr
    return DriftReport(rep.nu2, se, rep.residual, rep.ok, rep.variance)


def _strip_variance(profile: InitialProfile):
    if profile.variant is not Variant.GAUSSIAN_STRIP:
        return None
    return 2.0 * profile.kappa


def convergence_study(profile: InitialProfile, nu: float, kernel: CorrelationKernel, specs, grid: SpaceTimeGrid,
                      n_noise: int, point, n_paths: int, seed: int, fit_levels="final",
                      y_fit=None, compare_specs=None):
    """Distance from theta_{eps,delta} to the Stratonovich reference along ``specs``.

    Every level sees the same ``n_noise`` noise realizations and the same
    paths.  Per realization r the estimate difference D_r is averaged over
    paths; the reported distance is sqrt(mean_r(D_r^2 - s_r^2 / n_paths)),
    which removes the Monte Carlo inflation of D_r^2.  With a strip profile
    the effective nu2 is fitted at the levels selected by ``fit_levels``
    ("final", "all" or "none").  ``compare_specs``, when given, is a second
    sequence (e.g. bump mollifiers) whose distance to ``specs`` is reported
    per level in the column ``alt_distance``.
    """
    specs = list(specs)
    if any(a.eps <= b.eps or a.delta <= b.delta for a, b in zip(specs, specs[1:])):
        raise DomainError("mollifier sequence must be strictly decreasing")
    t, x, y = (float(v) for v in point)
    k = grid.t_index(t)
    tp = grid.t_points[: k + 1]
    pvar = _strip_variance(profile)
    n_lv = len(specs)
    fit_at = set()
    if pvar is not None and fit_levels == "all":
        fit_at = set(range(n_lv))
    elif pvar is not None and fit_levels == "final":
        fit_at = {n_lv - 1}
    if y_fit is None:
        y_fit = np.linspace(-6, 6, 49)
    sq = np.zeros((n_lv, n_noise))
    alt_sq = np.zeros((n_lv, n_noise))
    ref_vals = np.zeros(n_noise)
    fields = {lv: np.empty((n_noise, y_fit.size)) for lv in fit_at}
    for r in range(n_noise):
        noise = sample_noise(kernel, grid, seeding.child_seed(seed, "wz-noise", r))
        paths, other = _draw(seed, tp, n_paths, nu, "paths", r)
        xt = x + paths[:, -1]
        ref = profile(xt, y + other - sample_grid_batch(noise, x, paths, t))
        ref_vals[r] = ref.mean()
        for lv, spec in enumerate(specs):
            ym = mollified_curvilinear(noise, spec, x, paths, t)
            d = profile(xt, y + other - ym) - ref
            sq[lv, r] = d.mean() ** 2 - d.var(ddof=1) / n_paths
            if compare_specs is not None:
                ya = mollified_curvilinear(noise, compare_specs[lv], x, paths, t)
                da = profile(xt, y + other - ya) - profile(xt, y + other - ym)
                alt_sq[lv, r] = da.mean() ** 2 - da.var(ddof=1) / n_paths
            if lv in fit_at:
                fields[lv][r] = profile(xt[None, :], y_fit[:, None] + other[None, :] - ym[None, :]).mean(axis=1)
    rows = []
    for lv, spec in enumerate(specs):
        m2 = sq[lv].mean()
        dist = math.sqrt(max(m2, 0.0))
        se_m2 = sq[lv].std(ddof=1) / math.sqrt(n_noise) if n_noise > 1 else abs(m2)
        se = se_m2 / (2 * dist) if dist > 0 else math.sqrt(max(se_m2, 0.0))
        row = {"level": lv, "eps": spec.eps, "delta": spec.delta, "distance": dist, "stderr": se,
               "fitted_nu2": math.nan, "fit_stderr": math.nan}
        if compare_specs is not None:
            row["alt_distance"] = math.sqrt(max(alt_sq[lv].mean(), 0.0))
        if lv in fit_at:
            rep = fit_fields(fields[lv], y_fit - y, t, pvar)
            row["fitted_nu2"], row["fit_stderr"] = rep.nu2, rep.stderr
        rows.append(row)
    scale = math.sqrt(float(np.mean(ref_vals**2)))
    for row in rows:
        row["field_scale"] = scale
    return rows


def drift_identification(nu: float, kernel: CorrelationKernel, spec: MollifierSpec, grid: SpaceTimeGrid,
                         n_noise: int, n_paths: int, seed: int, t: float = 1.0, strip_kappa: float = 0.5,
                         y_fit=None) -> DriftReport:
    """Effective nu2 of the mean mollified field for the strip profile p_1^(strip_kappa)(y).

    Converges to nu + rho(0)/2 as the mollifier shrinks.
    """
    profile = InitialProfile.gaussian_strip(strip_kappa)
    if y_fit is None:
        y_fit = np.linspace(-6, 6, 49)
    tp = grid.t_points[: grid.t_index(t) + 1]
    fields = np.empty((n_noise, y_fit.size))
    for r in range(n_noise):
        noise = sample_noise(kernel, grid, seeding.child_seed(seed, "wz-noise", r))
        paths, other = _draw(seed, tp, n_paths, nu, "paths", r)
        ym = mollified_curvilinear(noise, spec, 0.0, paths, t)
        fields[r] = profile(paths[None, :, -1], y_fit[:, None] + other[None, :] - ym[None, :]).mean(axis=1)
    return fit_fields(fields, y_fit, t, 2.0 * strip_kappa)


def deterministic_heat_value(profile: InitialProfile, nu: float, point, half_width: float = 10.0, n: int = 801):
    """(p_t^nu (x) p_t^nu) * theta0 at one point by 2-D trapezoid quadrature."""
    t, x, y = (float(v) for v in point)
    a = np.linspace(-half_width, half_width, n)
    A, B = np.meshgrid(a, a, indexing="ij")
    vals = profile(x - A, y - B) * heat_kernel(nu, t, A) * heat_kernel(nu, t, B)
    h = a[1] - a[0]
    w = np.full(n, h)
    w[[0, -1]] /= 2
    return float(w @ vals @ w)
