"""Run configuration: a YAML file validated into a ``RunConfig``.

Schema (unknown keys are rejected everywhere)::

    experiment: gamma-trajectory | fk-solve | spectral-solve | wz-converge |
                dim-estimate | nu-limit | walsh-check | self-test
    kernel:   {family: constant | gaussian_bell | tabulated, rho0, length_scale, z, rho}
    params:   {nu, nu1, nu2, mu}
    grid:     {x_min, x_max, n_x, T, n_t}
    sampling: {n_samples, seed}          # seed is mandatory
    output:   directory for CSV files and the manifest
    options:  experiment-specific keys, see OPTION_DEFAULTS
"""
from __future__ import annotations

import copy
import enum
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .errors import ConfigError, DomainError
from .kernels import CorrelationKernel


class Experiment(str, enum.Enum):
    GAMMA_TRAJECTORY = "gamma-trajectory"
    FK_SOLVE = "fk-solve"
    SPECTRAL_SOLVE = "spectral-solve"
    WZ_CONVERGE = "wz-converge"
    DIM_ESTIMATE = "dim-estimate"
    NU_LIMIT = "nu-limit"
    WALSH_CHECK = "walsh-check"
    SELF_TEST = "self-test"


TOP_KEYS = {"experiment", "kernel", "params", "grid", "sampling", "output", "options"}
KERNEL_KEYS = {"family", "rho0", "length_scale", "z", "rho"}
PARAM_KEYS = {"nu", "nu1", "nu2", "mu"}
GRID_KEYS = {"x_min", "x_max", "n_x", "T", "n_t"}
SAMPLING_KEYS = {"n_samples", "seed"}

_PROFILE = {"kind": "strip", "kappa": 0.5, "sx": 0.7, "sy": 0.8, "value": 1.0}

OPTION_DEFAULTS = {
    Experiment.GAMMA_TRAJECTORY: {"horizon": 100000, "stride": 1, "twin_ratio": None},
    Experiment.FK_SOLVE: {"profile": _PROFILE, "mode": "unconditional", "x": 0.0, "y": 0.0,
                          "times": [0.25, 0.5, 1.0], "field_x": [-2.0, 2.0, 9], "field_y": [-2.0, 2.0, 9]},
    Experiment.SPECTRAL_SOLVE: {"profile": {**_PROFILE, "kind": "bump"}, "t": 0.5, "field_x": [-2.0, 2.0, 9],
                                "field_y": [-2.0, 2.0, 9], "half_width": 8.0, "n_x": 64, "n_xi": 65, "dt": 0.01},
    Experiment.WZ_CONVERGE: {"levels": 5, "eps0": 0.0016, "delta0": 4.0, "shape": "heat", "n_noise": 200,
                             "point": [1.0, 0.0, 0.0], "strip_kappa": 0.5, "fit_levels": "final"},
    Experiment.DIM_ESTIMATE: {"set": "level", "horizon": 100000, "replicates": 16, "refinement_levels": 4,
                              "z": 0.0, "alpha": 1.0, "K": 0.1, "delta": 1.0, "target": None, "tol": 0.12},
    Experiment.NU_LIMIT: {"table": "gamma-mean", "t": 1.0, "x": 0.0, "y": 0.0,
                          "nus": [0.1, 0.01, 0.001, 0.0001], "n_bridges": 10000},
    Experiment.WALSH_CHECK: {"functions": ["constant", "sin", "gauss"]},
    Experiment.SELF_TEST: {"criteria": None},
}

DEFAULT_KERNEL = {"family": "constant", "rho0": 1.0}
DEFAULT_PARAMS = {"nu": 1.0, "mu": 0.0}


def _check_keys(block, allowed, where):
    if block is None:
        return {}
    if not isinstance(block, dict):
        raise ConfigError(f"{where} must be a mapping")
    extra = set(block) - set(allowed)
    if extra:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(sorted(extra))}")
    return dict(block)


@dataclass
class RunConfig:
    experiment: Experiment
    seed: int
    kernel: dict = field(default_factory=lambda: dict(DEFAULT_KERNEL))
    params: dict = field(default_factory=lambda: dict(DEFAULT_PARAMS))
    grid: dict = field(default_factory=dict)
    n_samples: int = 10000
    output: str = "out"
    options: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, raw: dict) -> RunConfig:
        raw = _check_keys(raw, TOP_KEYS, "config")
        if "experiment" not in raw:
            raise ConfigError("experiment is required")
        try:
            exp = Experiment(raw["experiment"])
        except ValueError:
            raise ConfigError(f"unknown experiment {raw['experiment']!r}") from None
        sampling = _check_keys(raw.get("sampling"), SAMPLING_KEYS, "sampling")
        if sampling.get("seed") is None:
            raise ConfigError("sampling.seed is mandatory")
        kernel = _check_keys(raw.get("kernel", DEFAULT_KERNEL), KERNEL_KEYS, "kernel")
        params = _check_keys(raw.get("params", DEFAULT_PARAMS), PARAM_KEYS, "params")
        grid = _check_keys(raw.get("grid"), GRID_KEYS, "grid")
        opts = copy.deepcopy(OPTION_DEFAULTS[exp])
        given = _check_keys(raw.get("options"), opts.keys(), f"options for {exp.value}")
        opts.update(given)
        try:
            seed = int(sampling["seed"])
            n_samples = int(sampling.get("n_samples", 10000))
        except (TypeError, ValueError):
            raise ConfigError("sampling.seed and sampling.n_samples must be integers") from None
        if n_samples < 1:
            raise ConfigError("sampling.n_samples must be positive")
        cfg = cls(exp, seed, kernel, params, grid, n_samples, str(raw.get("output", "out")), opts)
        cfg.build_kernel()
        return cfg

    @classmethod
    def load(cls, path) -> RunConfig:
        try:
            raw = yaml.safe_load(Path(path).read_text())
        except (OSError, yaml.YAMLError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        return cls.from_dict(raw or {})

    def build_kernel(self) -> CorrelationKernel:
        if "family" not in self.kernel or "rho0" not in self.kernel and self.kernel.get("family") != "tabulated":
            raise ConfigError("kernel needs family and rho0")
        try:
            return CorrelationKernel.from_config(self.kernel)
        except (KeyError, ValueError, DomainError) as exc:
            raise ConfigError(f"invalid kernel block: {exc}") from None

    def to_dict(self) -> dict:
        return {"experiment": self.experiment.value, "kernel": self.kernel, "params": self.params,
                "grid": self.grid, "sampling": {"n_samples": self.n_samples, "seed": self.seed},
                "output": self.output, "options": self.options}

    def digest(self) -> str:
        """sha256 of the canonical JSON form, excluding the output location."""
        d = self.to_dict()
        d.pop("output")
        return hashlib.sha256(json.dumps(d, sort_keys=True, default=str).encode()).hexdigest()

    def grid_value(self, key, default=None):
        if key in self.grid:
            return self.grid[key]
        if default is None:
            raise ConfigError(f"grid.{key} is required for {self.experiment.value}")
        return default


def apply_override(raw: dict, assignment: str) -> None:
    """Apply ``section.key=value`` (value parsed as YAML) to a raw config mapping."""
    if "=" not in assignment:
        raise ConfigError(f"override {assignment!r} is not of the form key=value")
    key, value = assignment.split("=", 1)
    parts = key.strip().split(".")
    node = raw
    for p in parts[:-1]:
        node = node.setdefault(p, {})
        if not isinstance(node, dict):
            raise ConfigError(f"cannot override inside non-mapping {p!r}")
    node[parts[-1]] = yaml.safe_load(value)
