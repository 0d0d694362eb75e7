"""End-to-end numerical checks, one function per check group.

Each ``criterion_N(seed)`` returns a list of ``Check`` records; ``run``
executes a selection and ``write_csv`` stores the results.  All randomness
is derived from the root seed, so a run is replayable bit for bit.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from . import fractal, nu_limits, seeding, solver_wz
from .csvio import write_rows
from .curvilinear import CurvilinearRequest, sample_conditional
from .kernels import CorrelationKernel, ModelParams, heat_kernel
from .noise import MollifierShape, SpaceTimeGrid, sample_noise, walsh_variance_test
from .paths import standard_paths
from .solver_fk import (InitialProfile, Mode, draw_shifts, gamma_closed_form, gamma_field, profile_in_y,
                        solve_ito, sup_in_y, y_mass)
from .solver_spectral import SpectralSetup, fit_rate, periodic_grid, second_moment_trajectory, spectral_mean_field

DEFAULT_SEED = 20240601


@dataclass(frozen=True)
class Check:
    criterion: int
    name: str
    value: float
    target: float
    tol: float
    passed: bool
    detail: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (f"[{status}] criterion {self.criterion} {self.name}: value={self.value:.6g} "
                f"target={self.target:.6g} tol={self.tol:.3g} {self.detail}").rstrip()


def _close(criterion, name, value, target, tol, detail=""):
    return Check(criterion, name, float(value), float(target), float(tol), abs(value - target) <= tol, detail)


# ---------------------------------------------------------------------------

def criterion_1(seed=DEFAULT_SEED):
    """sup over (x, y) of the constant-kernel Gamma equals 1/(4 pi nu t)."""
    out = []
    for nu in (0.1, 1.0):
        for t in (1.0, 10.0, 100.0):
            w_t = math.sqrt(t) * seeding.rng(seed, "acc", 1, nu, t).standard_normal()

            def neg_log(p):
                return -math.log(gamma_closed_form(nu, 1.0, w_t, t, p[0], p[1]))

            res = optimize.minimize(neg_log, x0=[0.7, w_t + 0.4], method="BFGS", options={"gtol": 1e-12})
            val = float(gamma_closed_form(nu, 1.0, w_t, t, res.x[0], res.x[1]))
            target = 1.0 / (4 * math.pi * nu * t)
            rel = abs(val / target - 1)
            out.append(Check(1, f"sup nu={nu:g} t={t:g}", rel, 0.0, 1e-10, rel <= 1e-10, "relative error"))
    return out


def criterion_2(seed=DEFAULT_SEED):
    """Conditional variance of the curvilinear integral is t rho0 whatever the path."""
    t, rho0, n = 2.0, 3.0, 20000
    kernel = CorrelationKernel.gaussian_bell(rho0, 1.0)
    tp = np.linspace(0.0, t, 129)
    gen = seeding.rng(seed, "acc", 2)
    paths = math.sqrt(2.0) * standard_paths(gen, tp, 2)
    req = CurvilinearRequest(((0.0, paths[0]), (0.7, paths[1])), tp, kernel)
    y = sample_conditional(req, seeding.child_seed(seed, "acc", 2), n)
    tol = 3 * t * rho0 * math.sqrt(2 / n)
    return [_close(2, f"variance anchor {i}", y[:, i].var(ddof=1), t * rho0, tol) for i in range(2)]


def criterion_3(seed=DEFAULT_SEED):
    """E[Gamma_t(x, y)] = p_t^nu(x) p_t^(nu + rho0/2)(y) over noise and bridges."""
    nu, t, x, y = 0.5, 1.0, 0.3, -0.2
    kernel = CorrelationKernel.gaussian_bell(1.0, 1.0)
    grid = SpaceTimeGrid.uniform(-6.0, 6.0, 121, t, 128)
    n_noise, per_noise = 500, 100
    means = np.empty(n_noise)
    for r in range(n_noise):
        noise = sample_noise(kernel, grid, seeding.child_seed(seed, "acc", 3, "noise", r))
        est = gamma_field(nu, kernel, (t, x, y), per_noise, seeding.child_seed(seed, "acc", 3, "bridges", r),
                          Mode.CONDITIONAL, noise)
        means[r] = est.value
    value = means.mean()
    se = means.std(ddof=1) / math.sqrt(n_noise)
    target = heat_kernel(nu, t, x) * heat_kernel(nu + 0.5, t, y)
    return [_close(3, "mean of Gamma", value, target, 3 * se, f"stderr={se:.3g} n={n_noise * per_noise}")]


def criterion_4(seed=DEFAULT_SEED):
    """sup_y of the conditional solution for strip data equals (4 pi kappa (1+t))^-1/2."""
    rho0, nu = 1.0, 1.0
    kappa = nu - rho0 / 2
    params = ModelParams(nu, nu, rho0)
    kernel = CorrelationKernel.constant(rho0)
    profile = InitialProfile.gaussian_strip(kappa)
    times = (1.0, 4.0, 16.0)
    n = 200000
    out, sups = [], []
    for t in times:
        grid = SpaceTimeGrid.uniform(-60.0, 60.0, 121, t, int(16 * t))
        noise = sample_noise(kernel, grid, seeding.child_seed(seed, "acc", 4, "noise", t))
        dx, dy = draw_shifts(params, kernel, t, 0.0, n, seeding.child_seed(seed, "acc", 4, t), Mode.CONDITIONAL,
                             noise)
        f = profile_in_y(profile, 0.0, dx, dy)
        center = -float(np.mean(dy))
        width = 3 * math.sqrt(2 * kappa * (1 + t))
        _, sup = sup_in_y(f, center - width, center + width, n_grid=41)
        target = (4 * math.pi * kappa * (1 + t)) ** -0.5
        sups.append(sup)
        out.append(Check(4, f"sup t={t:g}", sup / target - 1, 0.0, 0.01, abs(sup / target - 1) <= 0.01,
                         "relative error"))
    slope = np.polyfit(np.log1p(times), np.log(sups), 1)[0]
    raw = np.polyfit(np.log(times), np.log(sups), 1)[0]
    out.append(_close(4, "log-log slope in (1+t)", slope, -0.5, 0.03, f"slope against t alone={raw:.4f}"))
    return out


def _bump_profile():
    def f(x, y):
        return np.exp(-x**2 / (2 * 0.7**2) - y**2 / (2 * 0.8**2)) / (2 * math.pi * 0.7 * 0.8)
    return InitialProfile.function(f, 1 / (2 * math.pi * 0.56))


def criterion_5(seed=DEFAULT_SEED, n=10000):
    """Spectral and Feynman-Kac estimates of E[theta] agree on a 9 x 9 probe grid."""
    kernel = CorrelationKernel.gaussian_bell(1.0, 1.0)
    params = ModelParams(1.0, 1.0, 1.0)
    t = 0.5
    setup = SpectralSetup()
    xs = np.linspace(-2.0, 2.0, 9)
    ys = np.linspace(-2.0, 2.0, 9)
    profile = _bump_profile()
    mean_s, se_s = spectral_mean_field(profile, params, kernel, t, xs, ys, n, seeding.child_seed(seed, "acc", 5),
                                       setup)
    worst = 0.0
    worst_z = 0.0
    for i, x in enumerate(xs):
        dx, dy = draw_shifts(params, kernel, t, x, n, seeding.child_seed(seed, "acc", 5, "fk", i))
        vals = profile(x + dx[None, :], ys[:, None] + dy[None, :])
        m = vals.mean(axis=1)
        se = vals.std(axis=1, ddof=1) / math.sqrt(n)
        diff = np.abs(m - mean_s[i])
        comb = np.sqrt(se**2 + se_s[i] ** 2)
        worst = max(worst, float(np.max(diff - 3 * comb)))
        worst_z = max(worst_z, float(np.max(diff / comb)))
    return [Check(5, "max |spectral - fk| / combined stderr", worst_z, 0.0, 3.0, worst <= 0.0,
                  f"n={n} per solver")]


def criterion_6(seed=DEFAULT_SEED, n_seeds=1000):
    """Fitted decay rate of E|U(t, ., xi)|^2 for a constant kernel."""
    nu2, rho0, xi = 1.0, 1.0, 1.0
    kernel = CorrelationKernel.constant(rho0)
    grid = periodic_grid(4.0, 16, 3.0, 300)
    times, sq, se = second_moment_trajectory(np.ones(grid.n), 1.0, nu2, xi, kernel, grid, n_seeds,
                                             seeding.child_seed(seed, "acc", 6))
    sel = times >= 0.5 - 1e-12
    rate, rate_se = fit_rate(times[sel], sq[sel, 0], se[sel, 0])
    bound = -2 * (nu2 - rho0 / 2) * xi**2 + 0.15
    return [Check(6, "second-moment decay rate", rate, bound, 0.0, rate <= bound, f"stderr={rate_se:.3g}")]


def criterion_7(seed=DEFAULT_SEED, n_noise=2000, n_paths=100):
    """Mollified solutions approach the Stratonovich solution; the drift is nu + rho0/2."""
    nu, rho0 = 0.5, 1.0
    kernel = CorrelationKernel.constant(rho0)
    grid = SpaceTimeGrid.uniform(-30.0, 30.0, 241, 1.5, 384)
    specs = solver_wz.default_sequence(0.04**2, 4.0, 5, MollifierShape.HEAT, nu)
    profile = InitialProfile.gaussian_strip(0.5)
    rows = solver_wz.convergence_study(profile, nu, kernel, specs, grid, n_noise, (1.0, 0.0, 0.0), n_paths,
                                       seeding.child_seed(seed, "acc", 7), fit_levels="final")
    worst = -math.inf
    for a, b in zip(rows, rows[1:]):
        worst = max(worst, (b["distance"] - a["distance"]) / max(a["stderr"], b["stderr"]))
    final = rows[-1]
    dists = " ".join(f"{r['distance']:.4g}" for r in rows)
    return [
        Check(7, "distance increase in stderr units", worst, 0.0, 1.0, worst <= 1.0, f"distances={dists}"),
        Check(7, "final distance / field scale", final["distance"] / final["field_scale"], 0.0, 0.05,
              final["distance"] < 0.05 * final["field_scale"]),
        _close(7, "fitted nu2", final["fitted_nu2"], nu + rho0 / 2, 0.05, f"stderr={final['fit_stderr']:.3g}"),
    ]


def criterion_8(seed=DEFAULT_SEED, replicates=64, horizon=10**6):
    """Level set of Brownian motion has dimension 1/2, a cone set dimension 1."""
    level, cone = [], []
    for r in range(replicates):
        s = seeding.child_seed(seed, "acc", 8, r)
        w = fractal.brownian_integers(horizon, s)
        level.append(fractal.bm_level_set(0.0, horizon, 4, s, w))
        cone.append(fractal.bm_cone_set(0.0, 1.0, horizon, s, w))
    e_level = fractal.estimate_dim(level)
    e_cone = fractal.estimate_dim(cone)
    squares = fractal.TimeSet.from_points(np.arange(int(math.isqrt(horizon)) + 1) ** 2, horizon)
    e_sq = fractal.estimate_dim(squares)
    return [
        _close(8, "level-set dimension", e_level.slope, 0.5, 0.12, f"stderr={e_level.stderr:.3g}"),
        _close(8, "cone-set dimension", e_cone.slope, 1.0, 0.05, f"stderr={e_cone.stderr:.3g}"),
        _close(8, "perfect squares dimension", e_sq.slope, 0.5, 0.05),
    ]


def criterion_9(seed=DEFAULT_SEED, replicates=16):
    """Decay-time dimensions, the K dichotomy and OU exceedance dimensions."""
    out = []
    nu, rho0 = 1.0, 4.0
    for ratio, target in ((0.25, 0.75), (0.5, 0.5), (1.5, 0.0)):
        delta = ratio * rho0 / (2 * nu)
        sets = [fractal.gamma_decay_logset(nu, rho0, delta, 10**5, seeding.child_seed(seed, "acc", 9, ratio, r))
                for r in range(replicates)]
        out.append(_close(9, f"decay dimension 2 delta nu/rho0={ratio:g}", fractal.dim_or_zero(sets), target, 0.15))
    nu, rho0 = 0.25, 1.0
    k_crit = 1 / (4 * math.pi * nu)
    slopes = []
    for K in (0.5 * k_crit, k_crit):
        sets = [fractal.gamma_exceedance_set(nu, rho0, K, 10**5, seeding.child_seed(seed, "acc", 9, "K", r))
                for r in range(replicates)]
        slopes.append(fractal.dim_or_zero(sets))
    gap = slopes[0] - slopes[1]
    out.append(Check(9, "K dichotomy slope gap", gap, 0.6, 0.0, gap > 0.6, f"slopes={slopes[0]:.3f},{slopes[1]:.3f}"))
    for alpha in (1.0, 4.0):
        sets = [fractal.ou_exceedance(alpha, 10**5, seeding.child_seed(seed, "acc", 9, "ou", alpha, r))
                for r in range(replicates)]
        d = fractal.dim_or_zero(sets)
        if alpha == 1.0:
            out.append(_close(9, "OU exceedance alpha=1", d, 0.5, 0.12))
        else:
            out.append(Check(9, "OU exceedance alpha=4", d, 0.0, 0.1, d < 0.1))
    return out


def _mixture_profile(extra=0.0):
    """x-dependent probability density in y, optionally plus a positive bump."""
    def q(x, y):
        z = y - 0.5 * np.sin(x)
        base = 0.6 * np.exp(-(z + 1) ** 2 / 0.5) / math.sqrt(0.5 * math.pi) + 0.4 * np.exp(
            -(z - 1.5) ** 2 / 2) / math.sqrt(2 * math.pi)
        return base + extra * np.exp(-y**2 / 2) * (1 + 0.5 * np.cos(x))
    return InitialProfile.function(q, 0.5 + 1.5 * extra)


def criterion_10(seed=DEFAULT_SEED, n_paths=2000):
    """Mass conservation in y, positivity and sample-wise comparison."""
    kernel = CorrelationKernel.gaussian_bell(1.0, 1.0)
    params = ModelParams(1.0, 1.0, 1.0)
    grid = SpaceTimeGrid.uniform(-12.0, 12.0, 97, 2.0, 128)
    noise = sample_noise(kernel, grid, seeding.child_seed(seed, "acc", 10, "noise"))
    low, high = _mixture_profile(), _mixture_profile(0.3)
    ys = np.linspace(-6, 6, 61)
    worst_mass, all_pos, ordered = 0.0, True, True
    for i, (t, x) in enumerate(((0.25, 0.0), (0.5, 0.5), (1.0, -1.0), (1.5, 1.0), (2.0, 0.0))):
        s = seeding.child_seed(seed, "acc", 10, i)
        dx, dy = draw_shifts(params, kernel, t, x, n_paths, s, Mode.CONDITIONAL, noise)
        f = profile_in_y(low, x, dx, dy)
        mass = y_mass(f, -float(np.mean(dy)), 20.0, tol=1e-8)
        worst_mass = max(worst_mass, abs(mass - 1))
        a = solve_ito(low, params, kernel, (t, x, 0.3), n_paths, s, Mode.CONDITIONAL, noise)
        b = solve_ito(high, params, kernel, (t, x, 0.3), n_paths, s, Mode.CONDITIONAL, noise)
        grid_vals = low(x + dx[None, :], ys[:, None] + dy[None, :])
        all_pos &= bool(np.all(grid_vals > 0) and np.all(a.samples > 0))
        ordered &= bool(np.all(a.samples <= b.samples))
    return [
        Check(10, "mass in y", worst_mass, 0.0, 1e-3, worst_mass <= 1e-3, "max |mass - 1| over 5 probes"),
        Check(10, "positivity", float(all_pos), 1.0, 0.0, all_pos),
        Check(10, "comparison", float(ordered), 1.0, 0.0, ordered),
    ]


def criterion_11(seed=DEFAULT_SEED, n_noise=20, n_paths=2000):
    """Inviscid limit for function data and the nu -> 0 behaviour of E[Gamma]."""
    kernel = CorrelationKernel.gaussian_bell(1.0, 1.0)
    grid = SpaceTimeGrid.uniform(-10.0, 10.0, 161, 1.0, 128)
    noises = [sample_noise(kernel, grid, seeding.child_seed(seed, "acc", 11, "noise", r)) for r in range(n_noise)]
    profile = InitialProfile.function(lambda x, y: np.exp(-y**2 / 2) * (1 + 0.5 * np.cos(x)) / 1.5, 1.0)
    dist = [nu_limits.inviscid_distance(profile, kernel, nu, (1.0, 0.0), noises, n_paths,
                                        seeding.child_seed(seed, "acc", 11))
            for nu in (1.0, 0.1, 0.01)]
    d = [r.distance for r in dist]
    decreasing = d[0] > d[1] > d[2]
    out = [Check(11, "inviscid distances decreasing", float(decreasing), 1.0, 0.0, decreasing,
                 "distances=" + ",".join(f"{v:.4g}" for v in d))]
    nus = [1e-1, 1e-2, 1e-3, 1e-4]
    table = nu_limits.gamma_mean_limit(CorrelationKernel.constant(1.0), 1.0, 0.0, 0.0, nus)
    lim = table[-1]["limit"]
    out.append(Check(11, "E[Gamma]/p at smallest nu vs limit", abs(table[-1]["analytic"] / lim - 1), 0.0, 1e-3,
                     abs(table[-1]["analytic"] / lim - 1) <= 1e-3, "relative"))
    dich = nu_limits.gamma_mean_dichotomy(CorrelationKernel.constant(1.0), 1.0, 0.0, nus, xs=(0.0, 1.0))
    out.append(_close(11, "nu exponent at x=0", dich.exponent, -0.5, 0.05))
    away = [r["analytic"] for r in dich.rows if r["x"] == 1.0]
    out.append(Check(11, "E[Gamma] at x=1, smallest nu", away[-1], 0.0, 1e-4, away[-1] < 1e-4))
    return out


def criterion_12(seed=DEFAULT_SEED, n_seeds=10000):
    """Variance of the stochastic integral of three test functions against the noise."""
    kernel = CorrelationKernel.gaussian_bell(1.0, 1.0)
    grid = SpaceTimeGrid.uniform(-2.0, 2.0, 17, 1.0, 8)
    tests = {
        "constant": lambda t, x: np.ones(np.broadcast(t, x).shape),
        "sin(pi x) t": lambda t, x: np.sin(np.pi * x) * t,
        "exp(-x^2) cos(3t)": lambda t, x: np.exp(-x**2) * np.cos(3 * t),
    }
    out = []
    for i, (name, phi) in enumerate(tests.items()):
        res = walsh_variance_test(kernel, grid, phi, n_seeds, seeding.child_seed(seed, "acc", 12, i))
        out.append(_close(12, f"isometry {name}", res.empirical, res.analytic, 3 * res.stderr,
                          f"stderr={res.stderr:.3g}"))
    return out


CRITERIA = {i: globals()[f"criterion_{i}"] for i in range(1, 13)}
FAST = (1, 2, 3, 10, 12)


def run(selection=None, seed=DEFAULT_SEED, echo=None):
    """Run the selected criteria; returns (checks, seconds per criterion)."""
    selection = sorted(CRITERIA) if selection is None else list(selection)
    checks, timing = [], {}
    for c in selection:
        t0 = time.perf_counter()
        res = CRITERIA[c](seed)
        timing[c] = time.perf_counter() - t0
        checks.extend(res)
        if echo:
            for ch in res:
                echo(ch.line())
    return checks, timing


def write_csv(path, checks):
    rows = [[c.criterion, c.name, c.value, c.target, c.tol, c.passed] for c in checks]
    return write_rows(path, ["criterion", "check", "value", "target", "tol", "pass"], rows)
