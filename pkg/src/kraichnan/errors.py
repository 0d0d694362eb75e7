"""Exception hierarchy."""


class KraichnanError(Exception):
    pass


class DomainError(KraichnanError, ValueError):
    """An argument lies outside the operation's domain."""


class LowTurbulenceError(DomainError):
    """Ito mode needs kappa = nu2 - rho(0)/2 > 0."""


class UnsupportedKernelError(DomainError):
    pass


class ResolutionError(DomainError):
    """A mollifier is too narrow for the grid it is evaluated on."""


class OutOfDomainError(DomainError):
    """A path or probe left the spatial grid; widen the grid."""


class InsufficientDataError(DomainError):
    pass


class NumericalError(KraichnanError, ArithmeticError):
    """Base for factorization and truncation failures (CLI exit code 3)."""


class DegenerateKernelError(NumericalError):
    pass


class DegenerateCovarianceError(NumericalError):
    pass


class TruncationError(NumericalError):
    pass


class ConfigError(KraichnanError, ValueError):
    pass
