"""Exception types shared across the package.

The CLI maps these onto its exit-code contract:
ConfigError -> 1, I/O (OSError) -> 2, NonConvergenceError -> 3.
"""


class ConfigError(ValueError):
    """Invalid configuration value or malformed config file."""


class DomainError(ValueError):
    """Argument outside the mathematical domain of an operation."""


class InterfaceError(ValueError):
    """Field evaluation requested exactly on the inclusion interface."""


class NonConvergenceError(RuntimeError):
    """Iterative solver exhausted max_iter; carries the residual history."""

    def __init__(self, message, residual_history=None):
        super().__init__(message)
        self.residual_history = list(residual_history or [])
