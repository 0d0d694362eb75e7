"""Spatial correlation kernels, the heat kernel and a few derived constants."""
from __future__ import annotations

import enum
import hashlib
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError


class Family(str, enum.Enum):
    CONSTANT = "constant"
    GAUSSIAN_BELL = "gaussian_bell"
    TABULATED = "tabulated"


@dataclass(frozen=True)
class CorrelationKernel:
    """Even, nonnegative correlation function rho with rho(0) = rho0.

    Tabulated kernels take samples on ``z >= 0`` starting at ``z = 0``; they
    are extended evenly, interpolated linearly and clamped to the last sample.
    """

    family: Family
    rho0: float
    length_scale: float = 1.0
    holder_const: float = 0.0
    holder_exp: float = 2.0
    monotone_on_halfline: bool = True
    strictly_peaked: bool = False
    table_z: tuple = field(default=(), repr=False)
    table_rho: tuple = field(default=(), repr=False)

    def __post_init__(self):
        if not self.rho0 > 0:
            raise DomainError("rho0 must be positive")
        if not self.length_scale > 0:
            raise DomainError("length_scale must be positive")
        if not 0 < self.holder_exp <= 2:
            raise DomainError("holder exponent must lie in (0, 2]")
        if self.holder_const < 0:
            raise DomainError("holder constant must be nonnegative")
        if self.family is Family.TABULATED:
            z = np.asarray(self.table_z, dtype=float)
            r = np.asarray(self.table_rho, dtype=float)
            if z.ndim != 1 or z.size < 2 or z.size != r.size:
                raise DomainError("table needs matching z and rho arrays of length >= 2")
            if z[0] != 0 or np.any(np.diff(z) <= 0):
                raise DomainError("table z must start at 0 and increase strictly")
            if r[0] != self.rho0 or np.any(r < 0) or np.any(r > self.rho0):
                raise DomainError("table values must satisfy 0 <= rho(z) <= rho(0) = rho0")

    # constructors -----------------------------------------------------------
    @classmethod
    def constant(cls, rho0: float) -> CorrelationKernel:
        return cls(Family.CONSTANT, float(rho0), holder_const=0.0, holder_exp=2.0,
                   monotone_on_halfline=True, strictly_peaked=False)

    @classmethod
    def gaussian_bell(cls, rho0: float, length_scale: float = 1.0) -> CorrelationKernel:
        rho0, ell = float(rho0), float(length_scale)
        return cls(Family.GAUSSIAN_BELL, rho0, ell, holder_const=rho0 / (2 * ell**2),
                   holder_exp=2.0, monotone_on_halfline=True, strictly_peaked=True)

    @classmethod
    def tabulated(cls, z, rho, holder_const=0.0, holder_exp=2.0) -> CorrelationKernel:
        z = tuple(float(v) for v in z)
        rho = tuple(float(v) for v in rho)
        arr = np.asarray(rho)
        monotone = bool(np.all(np.diff(arr) <= 0))
        peaked = bool(np.all(arr[1:] < arr[0]))
        return cls(Family.TABULATED, rho[0], max(z[-1], 1e-300), holder_const, holder_exp,
                   monotone, peaked, z, rho)

    @classmethod
    def from_config(cls, block: dict) -> CorrelationKernel:
        fam = Family(block["family"])
        if fam is Family.CONSTANT:
            return cls.constant(block["rho0"])
        if fam is Family.GAUSSIAN_BELL:
            return cls.gaussian_bell(block["rho0"], block.get("length_scale", 1.0))
        return cls.tabulated(block["z"], block["rho"])

    # evaluation -------------------------------------------------------------
    def __call__(self, z):
        z = np.abs(np.asarray(z, dtype=float))
        if self.family is Family.CONSTANT:
            return np.full_like(z, self.rho0)
        if self.family is Family.GAUSSIAN_BELL:
            return self.rho0 * np.exp(-0.5 * (z / self.length_scale) ** 2)
        return np.interp(z, self.table_z, self.table_rho)

    def scaled(self, factor: float) -> CorrelationKernel:
        """Kernel multiplied by ``factor`` (rho0 -> factor * rho0)."""
        if self.family is Family.CONSTANT:
            return CorrelationKernel.constant(self.rho0 * factor)
        if self.family is Family.GAUSSIAN_BELL:
            return CorrelationKernel.gaussian_bell(self.rho0 * factor, self.length_scale)
        return CorrelationKernel.tabulated(self.table_z, np.asarray(self.table_rho) * factor,
                                           self.holder_const * factor, self.holder_exp)

    @property
    def is_constant(self) -> bool:
        return self.family is Family.CONSTANT

    def digest(self) -> bytes:
        """Stable 8-byte fingerprint used in cache headers."""
        text = repr((self.family.value, self.rho0, self.length_scale, self.table_z, self.table_rho))
        return hashlib.blake2b(text.encode(), digest_size=8).digest()

    def to_config(self) -> dict:
        out = {"family": self.family.value, "rho0": self.rho0}
        if self.family is Family.GAUSSIAN_BELL:
            out["length_scale"] = self.length_scale
        if self.family is Family.TABULATED:
            out["z"] = list(self.table_z)
            out["rho"] = list(self.table_rho)
        return out


def eval_rho(kernel: CorrelationKernel, z):
    """rho(z); returns a float for scalar input."""
    out = kernel(z)
    return float(out) if np.ndim(out) == 0 else out


def heat_kernel(nu, t, x):
    """Fundamental solution of d/dt - nu d^2/dx^2: (4 pi nu t)^(-1/2) exp(-x^2 / (4 nu t))."""
    if np.any(np.asarray(nu) <= 0) or np.any(np.asarray(t) <= 0):
        raise DomainError("heat kernel needs nu > 0 and t > 0")
    x = np.asarray(x, dtype=float)
    out = np.exp(-x * x / (4.0 * nu * t)) / np.sqrt(4.0 * math.pi * nu * t)
    return float(out) if out.ndim == 0 else out


def kappa_of(nu2: float, rho0: float) -> float:
    if not rho0 > 0:
        raise DomainError("rho0 must be positive")
    return nu2 - 0.5 * rho0


def bdg_constant(k: float) -> float:
    """Moment constant c_k: 1 for k = 2 and 8k for k > 2."""
    if k < 2:
        raise DomainError("c_k is defined for k >= 2")
    return 1.0 if k == 2 else 8.0 * k


@dataclass(frozen=True)
class ModelParams:
    """Diffusivities and mean drift of the generalized model.

    ``nu1`` smooths along x, ``nu2`` along y; ``kappa`` is the y-diffusivity
    left over after the turbulent part rho(0)/2 is removed.
    """

    nu1: float
    nu2: float
    rho0: float
    mu: float = 0.0

    def __post_init__(self):
        if not (self.nu1 > 0 and self.nu2 > 0):
            raise DomainError("diffusivities must be positive")

    @classmethod
    def isotropic(cls, nu: float, rho0: float, mu: float = 0.0) -> ModelParams:
        return cls(nu, nu, rho0, mu)

    @classmethod
    def stratonovich(cls, nu: float, rho0: float, mu: float = 0.0) -> ModelParams:
        """Ito parameters equivalent to the Stratonovich model with viscosity ``nu``."""
        return cls(nu, nu + 0.5 * rho0, rho0, mu)

    @property
    def nu(self) -> float:
        if self.nu1 != self.nu2:
            raise AttributeError("nu is only defined in the isotropic case")
        return self.nu1

    @property
    def kappa(self) -> float:
        return kappa_of(self.nu2, self.rho0)
