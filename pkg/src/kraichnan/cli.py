"""Command-line entry point: ``kraichnan <experiment> [--config FILE] [flags]``.

Exit status: 0 success, 2 configuration or domain error, 3 numerical failure
(factorization or truncation), 4 acceptance failure in ``self-test``.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import os
import platform
import sys
import time
from pathlib import Path

import numpy as np
import scipy
import yaml

from . import __version__, _accel, acceptance, csvio, fractal, nu_limits, parallel, seeding, solver_wz
from .config import Experiment, RunConfig, apply_override
from .errors import ConfigError, DomainError, NumericalError
from .kernels import ModelParams, heat_kernel
from .noise import MollifierShape, SpaceTimeGrid, sample_noise, walsh_variance_test
from .solver_fk import InitialProfile, Mode, draw_shifts
from .solver_spectral import SpectralSetup, spectral_mean_field

OUT_ENV = "KRAICHNAN_OUT"
log = logging.getLogger("kraichnan")


# ---------------------------------------------------------------------------
# helpers

def build_profile(spec: dict) -> InitialProfile:
    kind = spec.get("kind", "strip")
    if kind == "strip":
        return InitialProfile.gaussian_strip(float(spec.get("kappa", 0.5)))
    if kind == "constant":
        return InitialProfile.constant(float(spec.get("value", 1.0)))
    if kind == "bump":
        sx, sy = float(spec.get("sx", 0.7)), float(spec.get("sy", 0.8))
        norm = 1 / (2 * math.pi * sx * sy)
        return InitialProfile.function(
            lambda x, y: norm * np.exp(-x**2 / (2 * sx**2) - y**2 / (2 * sy**2)), norm)
    raise ConfigError(f"unknown profile kind {kind!r}")


def _params(cfg: RunConfig, rho0: float) -> ModelParams:
    p = cfg.params
    if "nu1" in p or "nu2" in p:
        if "nu1" not in p or "nu2" not in p:
            raise ConfigError("give both params.nu1 and params.nu2, or params.nu alone")
        return ModelParams(float(p["nu1"]), float(p["nu2"]), rho0, float(p.get("mu", 0.0)))
    s = ModelParams.stratonovich(float(p.get("nu", 1.0)), rho0)
    return ModelParams(s.nu1, s.nu2, rho0, float(p.get("mu", 0.0)))


def _grid(cfg: RunConfig, T=None) -> SpaceTimeGrid:
    return SpaceTimeGrid.uniform(float(cfg.grid_value("x_min")), float(cfg.grid_value("x_max")),
                                 int(cfg.grid_value("n_x")), float(cfg.grid_value("T", T)),
                                 int(cfg.grid_value("n_t")))


def _linspace(triple):
    lo, hi, n = triple
    return np.linspace(float(lo), float(hi), int(n))


# ---------------------------------------------------------------------------
# experiments; each returns (list of written paths, passed flag or None)

def run_gamma_trajectory(cfg: RunConfig, out: Path):
    kernel = cfg.build_kernel()
    if not kernel.is_constant:
        raise ConfigError("gamma-trajectory uses the closed form and needs a constant kernel")
    o = cfg.options
    nu = float(cfg.params.get("nu", 1.0))
    horizon, stride = int(o["horizon"]), int(o["stride"])
    gen = seeding.rng(cfg.seed, "cli", "gamma-trajectory")
    w = np.cumsum(gen.standard_normal(horizon))
    t = np.arange(1, horizon + 1, dtype=float)
    sel = slice(stride - 1, None, stride)

    def t_gamma(v):
        return t * heat_kernel(v, t, 0.0) * heat_kernel(v, t, -math.sqrt(kernel.rho0) * w)

    cols = ["t", "t_gamma"]
    data = [t[sel], t_gamma(nu)[sel]]
    if o.get("twin_ratio") is not None:
        cols.append("t_gamma_twin")
        data.append(t_gamma(nu * float(o["twin_ratio"]))[sel])
    return [csvio.write_rows(out / "gamma_trajectory.csv", cols, zip(*data))], None


def run_fk_solve(cfg: RunConfig, out: Path):
    kernel = cfg.build_kernel()
    params = _params(cfg, kernel.rho0)
    o = cfg.options
    profile = build_profile(o["profile"])
    mode = Mode(o["mode"])
    times = [float(v) for v in o["times"]]
    noise = None
    if mode is Mode.CONDITIONAL:
        noise = sample_noise(kernel, _grid(cfg, max(times)), seeding.child_seed(cfg.seed, "cli", "noise"))
    x, y = float(o["x"]), float(o["y"])
    vals, errs = [], []
    for i, t in enumerate(times):
        dx, dy = draw_shifts(params, kernel, t, x, cfg.n_samples, seeding.child_seed(cfg.seed, "cli", "fk", i),
                             mode, noise)
        s = profile(x + dx, y + dy)
        vals.append(s.mean())
        errs.append(s.std(ddof=1) / math.sqrt(s.size))
    paths = [csvio.write_trajectory(out / "trajectory.csv", times, vals, errs, mode, params.nu1, kernel.rho0,
                                    cfg.seed)]
    xs, ys = _linspace(o["field_x"]), _linspace(o["field_y"])
    field = np.empty((xs.size, ys.size))
    ferr = np.empty_like(field)
    for i, xv in enumerate(xs):
        dx, dy = draw_shifts(params, kernel, times[-1], xv, cfg.n_samples,
                             seeding.child_seed(cfg.seed, "cli", "field", i), mode, noise)
        s = profile(xv + dx[None, :], ys[:, None] + dy[None, :])
        field[i] = s.mean(axis=1)
        ferr[i] = s.std(axis=1, ddof=1) / math.sqrt(s.shape[1])
    meta = {"t": times[-1], "mode": mode.value, "nu1": params.nu1, "nu2": params.nu2, "rho0": kernel.rho0,
            "seed": cfg.seed}
    paths.append(csvio.write_grid_field(out / "field.csv", xs, ys, field, ferr, meta))
    return paths, None


def run_spectral_solve(cfg: RunConfig, out: Path):
    kernel = cfg.build_kernel()
    params = _params(cfg, kernel.rho0)
    o = cfg.options
    setup = SpectralSetup(float(o["half_width"]), int(o["n_x"]), int(o["n_xi"]), float(o["dt"]))
    xs, ys = _linspace(o["field_x"]), _linspace(o["field_y"])
    mean, se = spectral_mean_field(build_profile(o["profile"]), params, kernel, float(o["t"]), xs, ys,
                                   cfg.n_samples, seeding.child_seed(cfg.seed, "cli", "spectral"), setup)
    meta = {"t": float(o["t"]), "mode": "spectral", "nu1": params.nu1, "nu2": params.nu2, "rho0": kernel.rho0,
            "seed": cfg.seed}
    return [csvio.write_grid_field(out / "field.csv", xs, ys, mean, se, meta)], None


def run_wz_converge(cfg: RunConfig, out: Path):
    kernel = cfg.build_kernel()
    o = cfg.options
    nu = float(cfg.params.get("nu", 0.5))
    specs = solver_wz.default_sequence(float(o["eps0"]), float(o["delta0"]), int(o["levels"]),
                                       MollifierShape(o["shape"]), nu)
    rows = solver_wz.convergence_study(InitialProfile.gaussian_strip(float(o["strip_kappa"])), nu, kernel, specs,
                                       _grid(cfg), int(o["n_noise"]), tuple(o["point"]), cfg.n_samples,
                                       seeding.child_seed(cfg.seed, "cli", "wz"), fit_levels=o["fit_levels"])
    return [csvio.write_convergence(out / "convergence.csv", rows)], None


def _dimension_sets(cfg: RunConfig):
    o = cfg.options
    kind, h, reps, lv = o["set"], int(o["horizon"]), int(o["replicates"]), int(o["refinement_levels"])
    kernel = cfg.build_kernel()
    nu = float(cfg.params.get("nu", 1.0))
    sets = []
    for r in range(reps):
        s = seeding.child_seed(cfg.seed, "cli", "dim", r)
        if kind == "level":
            sets.append(fractal.bm_level_set(float(o["z"]), h, lv, s))
        elif kind == "cone":
            sets.append(fractal.bm_cone_set(float(o["z"]), float(o["alpha"]), h, s))
        elif kind == "ou":
            sets.append(fractal.ou_exceedance(float(o["alpha"]), h, s, lv))
        elif kind == "gamma-exceedance":
            sets.append(fractal.gamma_exceedance_set(nu, kernel.rho0, float(o["K"]), h, s))
        elif kind == "gamma-decay":
            sets.append(fractal.gamma_decay_logset(nu, kernel.rho0, float(o["delta"]), h, s, lv))
        else:
            raise ConfigError(f"unknown set kind {kind!r}")
    defaults = {"level": 0.5, "cone": 1.0, "ou": max(0.0, 1 - float(o["alpha"]) / 2),
                "gamma-decay": fractal.decay_dimension(nu, kernel.rho0, float(o["delta"]))}
    if kind == "gamma-exceedance":
        defaults[kind] = 1.0 if fractal.cone_width(nu, kernel.rho0, float(o["K"])) else 0.0
    target = defaults[kind] if o.get("target") is None else float(o["target"])
    return sets, target


def run_dim_estimate(cfg: RunConfig, out: Path):
    sets, target = _dimension_sets(cfg)
    tol = float(cfg.options["tol"])
    if all(s.counts()[-1] == 0 for s in sets):
        est = fractal.DimEstimate(0.0, 0.0, (0, 0), np.zeros(0, dtype=np.int64), np.zeros(0))
    else:
        est = fractal.estimate_dim(sets)
    return [csvio.write_dimension(out / "dimension.csv", est, target, tol)], None


def run_nu_limit(cfg: RunConfig, out: Path):
    kernel = cfg.build_kernel()
    o = cfg.options
    seed = seeding.child_seed(cfg.seed, "cli", "nu")
    t, x, y = float(o["t"]), float(o["x"]), float(o["y"])
    if o["table"] == "gamma-mean":
        rows = nu_limits.gamma_mean_limit(kernel, t, x, y, o["nus"], int(o["n_bridges"]), seed)
    elif o["table"] == "dichotomy":
        rows = nu_limits.gamma_mean_dichotomy(kernel, t, y, o["nus"], (x,), int(o["n_bridges"]), seed).rows
    else:
        raise ConfigError(f"unknown nu-limit table {o['table']!r}")
    return [csvio.write_nu_table(out / "nu_table.csv", rows)], None


WALSH_FUNCTIONS = {
    "constant": lambda t, x: np.ones(np.broadcast(t, x).shape),
    "sin": lambda t, x: np.sin(np.pi * x) * t,
    "gauss": lambda t, x: np.exp(-x**2) * np.cos(3 * t),
}


def run_walsh_check(cfg: RunConfig, out: Path):
    kernel = cfg.build_kernel()
    grid = SpaceTimeGrid.uniform(float(cfg.grid.get("x_min", -2.0)), float(cfg.grid.get("x_max", 2.0)),
                                 int(cfg.grid.get("n_x", 17)), float(cfg.grid.get("T", 1.0)),
                                 int(cfg.grid.get("n_t", 8)))
    rows = []
    for i, name in enumerate(cfg.options["functions"]):
        if name not in WALSH_FUNCTIONS:
            raise ConfigError(f"unknown test function {name!r}")
        r = walsh_variance_test(kernel, grid, WALSH_FUNCTIONS[name], cfg.n_samples,
                                seeding.child_seed(cfg.seed, "cli", "walsh", i))
        rows.append([name, r.empirical, r.analytic, r.stderr, abs(r.empirical - r.analytic) <= 3 * r.stderr])
    path = csvio.write_rows(out / "walsh.csv", ["function", "empirical", "analytic", "stderr", "pass"], rows)
    return [path], all(r[-1] for r in rows)


def run_self_test(cfg: RunConfig, out: Path):
    sel = cfg.options.get("criteria")
    if sel is not None:
        sel = [int(c) for c in sel]
        bad = [c for c in sel if c not in acceptance.CRITERIA]
        if bad:
            raise ConfigError(f"unknown criteria: {bad}")
    checks, timing = acceptance.run(sel, cfg.seed, echo=print)
    path = acceptance.write_csv(out / "acceptance.csv", checks)
    return [path], all(c.passed for c in checks)


RUNNERS = {
    Experiment.GAMMA_TRAJECTORY: run_gamma_trajectory,
    Experiment.FK_SOLVE: run_fk_solve,
    Experiment.SPECTRAL_SOLVE: run_spectral_solve,
    Experiment.WZ_CONVERGE: run_wz_converge,
    Experiment.DIM_ESTIMATE: run_dim_estimate,
    Experiment.NU_LIMIT: run_nu_limit,
    Experiment.WALSH_CHECK: run_walsh_check,
    Experiment.SELF_TEST: run_self_test,
}


# ---------------------------------------------------------------------------

def write_manifest(out: Path, cfg: RunConfig, outputs, wall: float, passed):
    manifest = {
        "experiment": cfg.experiment.value,
        "config_sha256": cfg.digest(),
        "seed": cfg.seed,
        "threads": parallel.get_threads(),
        "wall_time_s": round(wall, 3),
        "passed": passed,
        "outputs": [Path(p).name for p in outputs],
        "config": cfg.to_dict(),
        "versions": {"kraichnan": __version__, "backend": _accel.BACKEND, "python": platform.python_version(),
                     "numpy": np.__version__, "scipy": scipy.__version__},
    }
    path = out / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True, default=str) + "\n")
    return path


def run(cfg: RunConfig, out: Path) -> int:
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    outputs, passed = RUNNERS[cfg.experiment](cfg, out)
    write_manifest(out, cfg, outputs, time.perf_counter() - t0, passed)
    for p in outputs:
        log.info("wrote %s", p)
    return 4 if passed is False and cfg.experiment is Experiment.SELF_TEST else 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="kraichnan", description=__doc__.splitlines()[0])
    ap.add_argument("experiment", choices=[e.value for e in Experiment])
    ap.add_argument("--config", help="YAML run configuration")
    ap.add_argument("--seed", type=int, help="root seed (overrides sampling.seed)")
    ap.add_argument("--threads", type=int, default=1, help="worker threads (results do not depend on it)")
    ap.add_argument("--out", help=f"output directory (overrides ${OUT_ENV} and the config)")
    ap.add_argument("--samples", type=int, help="overrides sampling.n_samples")
    ap.add_argument("--criteria", help="self-test: comma-separated criterion numbers")
    ap.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                    help="override any config entry, e.g. --set options.horizon=1000")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        raw = {}
        if args.config:
            raw = yaml.safe_load(Path(args.config).read_text()) or {}
            if not isinstance(raw, dict):
                raise ConfigError("config file must hold a mapping")
        if raw.get("experiment", args.experiment) != args.experiment:
            raise ConfigError(f"config is for {raw['experiment']!r}, not {args.experiment!r}")
        raw["experiment"] = args.experiment
        if args.seed is not None:
            raw.setdefault("sampling", {})["seed"] = args.seed
        if args.samples is not None:
            raw.setdefault("sampling", {})["n_samples"] = args.samples
        if args.criteria:
            raw.setdefault("options", {})["criteria"] = [int(c) for c in args.criteria.split(",")]
        for ov in args.overrides:
            apply_override(raw, ov)
        cfg = RunConfig.from_dict(raw)
        out = Path(args.out or os.environ.get(OUT_ENV) or cfg.output)
        parallel.set_threads(args.threads)
        return run(cfg, out)
    except (ConfigError, DomainError, OSError, ValueError, yaml.YAMLError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
