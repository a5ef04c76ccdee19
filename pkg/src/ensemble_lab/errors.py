"""Exception hierarchy.

Errors split into configuration/usage problems (CLI exit code 2) and
scientific or numerical failures (exit code 1).
"""


class EnsembleLabError(Exception):
    """Base class for all library errors."""

    exit_code = 1


class ConfigError(EnsembleLabError, ValueError):
    """Malformed model document, bad option, unsupported combination."""

    exit_code = 2

    def __init__(self, message, field=None):
        self.field = field
        if field:
            message = f"{field}: {message}"
        super().__init__(message)


class PreconditionError(EnsembleLabError, ValueError):
    """Inputs violate a documented precondition of an operation."""

    exit_code = 2


class DataError(EnsembleLabError, ValueError):
    """Evaluation produced NaN or otherwise unusable numbers."""

    def __init__(self, message, witness=None):
        self.witness = witness
        super().__init__(message)


class ModelError(EnsembleLabError):
    """The model does not have the structure an operation requires."""


class InsufficientDataError(EnsembleLabError, ValueError):
    """Too few finite points for the requested analysis."""


class BracketError(EnsembleLabError):
    """A root bracket does not straddle the target value."""


class ConvergenceError(EnsembleLabError):
    """An iterative method ran out of budget."""

    def __init__(self, message, diagnostics=None):
        self.diagnostics = diagnostics
        super().__init__(message)
