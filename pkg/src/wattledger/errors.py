"""Exception hierarchy.

``DataError`` covers problems with the measurements themselves (malformed
files, coverage gaps, failed report validation). Everything else that is a
caller mistake raises a plain ``ValueError`` subclass.
"""

from __future__ import annotations


class WattLedgerError(Exception):
    """Base class for all errors raised by this package."""


class UnitError(WattLedgerError, ValueError):
    """Unknown unit symbol or dimensionally incompatible conversion."""


class DataError(WattLedgerError, ValueError):
    """The input data is malformed, inconsistent or insufficient."""


class ParseError(DataError):
    """A file or stream could not be parsed.

    ``line`` is the 1-based line number in the source when known.
    """

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class CoverageError(DataError):
    """A requested interval is not covered by the available samples."""

    def __init__(self, message: str, span: tuple[float, float] | None = None):
        self.span = span
        super().__init__(message)


class InsufficientDataError(DataError):
    """Too few samples for the requested statistic."""


class ReportValidationError(DataError):
    """A report failed validation and cannot be rendered."""

    def __init__(self, findings):
        self.findings = list(findings)
        rules = ", ".join(f.rule for f in self.findings if f.severity == "error")
        super().__init__(f"report failed validation: {rules}")
