"""Exception types shared across the package.

The CLI maps these onto exit codes: configuration problems exit with 1,
numerical-domain problems with 3.
"""


class ConfigError(ValueError):
    """Invalid or inconsistent parameters."""


class DomainError(ValueError):
    """A formula was evaluated outside its mathematical domain."""


class NumericalDomainError(ArithmeticError):
    """A computed quantity is unphysical (e.g. a symplectic eigenvalue below 1)."""


class EstimationError(ArithmeticError):
    """Parameter estimation is degenerate or has too little data."""


class InsufficientDataError(EstimationError):
    pass
