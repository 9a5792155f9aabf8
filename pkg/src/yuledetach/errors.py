"""Exception hierarchy shared by all modules.

Every error raised on purpose by the package derives from ``YuleError`` so
callers (the CLI in particular) can separate domain failures from bugs.
"""


class YuleError(Exception):
    """Base class for errors raised by yuledetach."""


class DomainError(YuleError, ValueError):
    """An argument lies outside the domain where the operation is defined."""


class PoleError(DomainError):
    """The requested value sits on a pole (e.g. 2F1 with c = 0, -1, -2, ...)."""


class NumericOverflowError(YuleError, OverflowError):
    """A result is not representable as a finite double."""


class AccuracyError(YuleError, ArithmeticError):
    """Requested accuracy was not reached within the iteration budget.

    ``partial`` carries the best estimate obtained so far (an ``EvalResult``
    or ``None``).
    """

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class FitError(YuleError, RuntimeError):
    """A fitting procedure failed; ``best`` holds the best-so-far result."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class ResourceError(YuleError, RuntimeError):
    """A simulation exceeded its configured event cap.

    ``partial`` is the snapshot at the moment the cap was hit.
    """

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class InputFormatError(DomainError):
    """Malformed external input (e.g. a histogram CSV row)."""
