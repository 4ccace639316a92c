"""Exception types shared across the solvers and the command-line front end."""

from __future__ import annotations


class InstanceError(ValueError):
    """An instance or plan violates a structural invariant."""


class ParseError(ValueError):
    """A text file could not be parsed.

    ``line`` is the 1-based line number of the offending record, or ``None``
    when the problem concerns the file as a whole.
    """

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)


class InfeasibleError(RuntimeError):
    """Some excess cannot reach any deficit."""

    def __init__(self, message: str, vertex: int | None = None):
        self.vertex = vertex
        super().__init__(message)


class InvariantViolation(RuntimeError):
    """An internal consistency check failed; this always indicates a bug."""
