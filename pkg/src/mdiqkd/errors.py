"""Exception hierarchy shared across the package.

Each error class corresponds to one failure family surfaced by the CLI
with a distinct exit code (see :mod:`mdiqkd.cli`).
"""

from __future__ import annotations


class MdiqkdError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(MdiqkdError, ValueError):
    """An argument violates an operation's documented domain."""


class PhysicalityError(MdiqkdError, ValueError):
    """A state or probability violates a physicality invariant."""


class ConvergenceError(MdiqkdError, RuntimeError):
    """An iterative solve exhausted its budget without converging."""


class SingularSystemError(MdiqkdError, ValueError):
    """A linear system is singular or too ill-conditioned to invert."""


class MissingDataError(MdiqkdError, KeyError):
    """A required table cell or record is absent from the input data."""


class DataInconsistencyError(MdiqkdError, ValueError):
    """Measured data admit no physical decomposition (infeasible LP).

    Carries the name of the offending constraint row when known, so
    reports can point at the exact cell that cannot be satisfied.
    """

    def __init__(self, message: str, constraint: str | None = None):
        super().__init__(message)
        self.constraint = constraint


class ParseError(MdiqkdError, ValueError):
    """An input file failed to parse or failed schema validation."""
