"""Exception types shared across the package."""

from __future__ import annotations


class QnpuLabError(Exception):
    """Base class for all errors raised by qnpu_lab."""


class InvalidArgument(QnpuLabError, ValueError):
    """An argument is outside the domain an operation accepts."""


class PreconditionError(QnpuLabError, ValueError):
    """Input is well-typed but violates a documented precondition."""


class DimensionMismatch(InvalidArgument):
    pass


class ConvergenceError(QnpuLabError, RuntimeError):
    """An iterative solver ran out of iterations.

    The last iterate is kept on ``last`` so callers can inspect or resume.
    """

    def __init__(self, message: str, last=None, iterations: int | None = None):
        super().__init__(message)
        self.last = last
        self.iterations = iterations


class DegenerateFunctionError(QnpuLabError, ValueError):
    """A requested function is identically zero on the grid and cannot be normalized."""


class DetectionError(QnpuLabError, RuntimeError):
    """No asymptotic scaling window was found."""


class ConfigError(QnpuLabError, ValueError):
    """Configuration text could not be parsed or validated."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        loc = ""
        if line is not None:
            loc = f"line {line}" + (f", column {column}" if column is not None else "") + ": "
        super().__init__(loc + message)
        self.line = line
        self.column = column
