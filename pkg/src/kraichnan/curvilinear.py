"""The curvilinear integral Y = int_0^t V(s, x + X_{t-s}) ds.

Given the path X, Y is centered Gaussian, and for several anchors the
covariance is the time integral of rho along the difference of the paths.
This module samples Y two ways: exactly from that conditional law, and as a
Riemann sum against one fixed noise realization.  It also has the bridge
correlation functional used in the small-viscosity limit.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import trapezoid

from . import _accel, seeding
from .errors import DegenerateCovarianceError, DomainError, OutOfDomainError
from .kernels import CorrelationKernel
from .noise import JITTERS, NoiseRealization
from .paths import bridge_values, standard_paths

MIN_QUADRATURE_STEPS = 16


@dataclass(frozen=True, eq=False)
class CurvilinearRequest:
    """Anchors ``(x_i, path_i)`` whose paths share ``t_points`` (0 .. t)."""

    anchors: tuple
    t_points: np.ndarray
    kernel: CorrelationKernel

    def __post_init__(self):
        t = np.asarray(self.t_points, dtype=float)
        if t.size - 1 < MIN_QUADRATURE_STEPS:
            raise DomainError(f"need at least {MIN_QUADRATURE_STEPS} quadrature steps")
        anchors = tuple((float(x), np.asarray(p, dtype=float)) for x, p in self.anchors)
        if not anchors:
            raise DomainError("need at least one anchor")
        for _, p in anchors:
            if p.shape != t.shape:
                raise DomainError("all paths must live on t_points")
        object.__setattr__(self, "t_points", t)
        object.__setattr__(self, "anchors", anchors)

    @property
    def t(self) -> float:
        return float(self.t_points[-1])

    @property
    def quadrature_steps(self) -> int:
        return self.t_points.size - 1


def conditional_cov(req: CurvilinearRequest) -> np.ndarray:
    """Trapezoid rule for int_0^t rho(x_i - x_j + X_i(t-s) - X_j(t-s)) ds."""
    n = len(req.anchors)
    xs = np.array([a[0] for a in req.anchors])
    paths = np.stack([a[1] for a in req.anchors])
    cov = np.empty((n, n))
    for i in range(n):
        diff = xs[i] - xs[:, None] + paths[i][None, :] - paths
        cov[i] = trapezoid(req.kernel(diff), req.t_points, axis=1)
    cov = 0.5 * (cov + cov.T)
    np.fill_diagonal(cov, req.t * req.kernel.rho0)
    return cov


def _factor(cov: np.ndarray, rho_scale: float) -> np.ndarray:
    eye = np.eye(cov.shape[0])
    for jitter in JITTERS:
        try:
            return np.linalg.cholesky(cov + jitter * rho_scale * eye)
        except np.linalg.LinAlgError:
            continue
    raise DegenerateCovarianceError("conditional covariance is not factorizable")


def sample_conditional(req: CurvilinearRequest, seed: int, n_draws: int | None = None) -> np.ndarray:
    """Draw Y at every anchor from its conditional Gaussian law given the paths.

    Returns shape (n_anchors,) or (n_draws, n_anchors).  Under a constant
    kernel the covariance has rank one and every anchor gets the same value.
    """
    gen = seeding.rng(seed, "curvilinear", "conditional")
    rows = 1 if n_draws is None else int(n_draws)
    n = len(req.anchors)
    if req.kernel.is_constant:
        xi = gen.standard_normal(rows)
        out = np.repeat((math.sqrt(req.t * req.kernel.rho0) * xi)[:, None], n, axis=1)
    else:
        L = _factor(conditional_cov(req), req.t * req.kernel.rho0)
        out = gen.standard_normal((rows, n)) @ L.T
    return out[0] if n_draws is None else out


def grid_positions(noise: NoiseRealization, x, paths, t: float):
    """Positions x + X_{t - t_j} for the left endpoints t_j of the steps before t.

    ``paths`` has shape (p, k + 1) on the noise time grid up to t = t_k.
    """
    k = noise.grid.t_index(t)
    paths = np.atleast_2d(np.asarray(paths, dtype=float))
    if paths.shape[1] != k + 1:
        raise DomainError("paths must be sampled on the noise time grid up to t")
    pos = np.asarray(x, dtype=float).reshape(-1, 1) + paths[:, ::-1][:, : k]
    lo, hi = noise.grid.x_points[0], noise.grid.x_points[-1]
    if pos.size and (pos.min() < lo or pos.max() > hi):
        raise OutOfDomainError("path left the spatial grid; widen the grid")
    return np.ascontiguousarray(pos), k


def sample_grid_batch(noise: NoiseRealization, x, paths, t: float) -> np.ndarray:
    """Riemann sums sum_j dW_j(x + X_{t - t_j}) for a batch of paths."""
    pos, k = grid_positions(noise, x, paths, t)
    if k == 0:
        return np.zeros(pos.shape[0])
    g = noise.grid
    return _accel.curvilinear_sum(noise.increments[:k], float(g.x_points[0]), float(g.dx), pos)


def sample_grid(noise: NoiseRealization, x: float, path, t: float) -> float:
    values = getattr(path, "values", path)
    return float(sample_grid_batch(noise, x, np.asarray(values)[None, :], t)[0])


def ktilde_samples(kernel: CorrelationKernel, t: float, x: float, x_prime: float, speed: float,
                   n_pairs: int, seed: int, quadrature_steps: int = 256,
                   antithetic: bool = True) -> np.ndarray:
    """Draws of (t rho0)^-1 int_0^t rho(x - x' + B_{t-s} - B'_{t-s}) ds.

    B and B' are independent bridges of speed ``speed`` from 0 to -x and -x'.
    With ``antithetic`` the draws come in consecutive sign-flipped pairs
    (2k, 2k+1); average them pairwise before computing a standard error.
    """
    if quadrature_steps < MIN_QUADRATURE_STEPS:
        raise DomainError(f"need at least {MIN_QUADRATURE_STEPS} quadrature steps")
    if kernel.is_constant:
        return np.ones(n_pairs)
    tp = np.linspace(0.0, t, quadrature_steps + 1)
    gen = seeding.rng(seed, "curvilinear", "ktilde")
    n_base = (n_pairs + 1) // 2 if antithetic else n_pairs
    z1 = standard_paths(gen, tp, n_base)
    z2 = standard_paths(gen, tp, n_base)
    if antithetic:
        z1 = np.stack([z1, -z1], axis=1).reshape(-1, tp.size)[:n_pairs]
        z2 = np.stack([z2, -z2], axis=1).reshape(-1, tp.size)[:n_pairs]
    s = math.sqrt(speed)
    b1 = bridge_values(s * z1, tp, t, -x)
    b2 = bridge_values(s * z2, tp, t, -x_prime)
    vals = trapezoid(kernel(x - x_prime + b1 - b2), tp, axis=1) / (t * kernel.rho0)
    return np.minimum(vals, 1.0)


def ktilde(kernel: CorrelationKernel, t: float, x: float, x_prime: float, speed: float,
           seed: int, quadrature_steps: int = 256) -> float:
    """One draw of the bridge correlation functional, in [-1, 1]."""
    return float(ktilde_samples(kernel, t, x, x_prime, speed, 1, seed, quadrature_steps,
                                antithetic=False)[0])
