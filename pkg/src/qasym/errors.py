"""Exception hierarchy.

The CLI maps :class:`ValidationError` to exit status 1 and
:class:`ConvergenceError` to exit status 2.
"""


class QasymError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(QasymError, ValueError):
    """Input violates a precondition (shape, domain, positivity, ...)."""


class ConvergenceError(QasymError, RuntimeError):
    """A numerical procedure failed to reach its stated tolerance."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})
