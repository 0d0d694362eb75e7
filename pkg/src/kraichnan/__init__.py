"""Monte Carlo, spectral and fractal tools for the Kraichnan passive-scalar model."""
from ._accel import BACKEND
from .errors import (ConfigError, DomainError, KraichnanError, LowTurbulenceError, NumericalError,
                     UnsupportedKernelError)
from .kernels import CorrelationKernel, ModelParams, heat_kernel

__version__ = "0.1.0"

__all__ = ["BACKEND", "ConfigError", "CorrelationKernel", "DomainError", "KraichnanError",
           "LowTurbulenceError", "ModelParams", "NumericalError", "UnsupportedKernelError",
           "heat_kernel", "__version__"]
