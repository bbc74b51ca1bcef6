"""Exception hierarchy shared across the package."""


class EvtkitError(Exception):
    """Base class for all evtkit errors."""


class ModelError(EvtkitError):
    """Invalid model text or violated chain invariant.

    Carries the offending line number when raised by the parser.
    """

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class SolverError(EvtkitError):
    """Numeric kernel failure: iteration cap exceeded, inverted bounds,
    or a threshold that cannot be represented."""


class QueryError(EvtkitError):
    """Degenerate query, e.g. conditioning on an unreachable target."""
