"""Exception hierarchy for the monitoring engine."""

from __future__ import annotations


class SastlError(Exception):
    """Base class for all engine errors."""


class SignalError(SastlError):
    """Problems with trace data access or construction."""


class SampleOutOfRangeError(SignalError):
    def __init__(self, index: int, count: int):
        super().__init__(f"sample index {index} outside grid [0, {count})")
        self.index = index
        self.count = count


class UnknownLocationError(SignalError):
    def __init__(self, location: str):
        super().__init__(f"unknown location {location!r}")
        self.location = location


class UnknownVariableError(SignalError):
    def __init__(self, variable: str):
        super().__init__(f"unknown variable {variable!r}")
        self.variable = variable


class EmptySignalError(SignalError):
    """Raised when a signal would be built from no records at all."""


class GraphError(SastlError):
    """Invalid location graph (bad weight, self loop, unknown endpoint)."""


class FormulaError(SastlError):
    """Structurally invalid formula (bad operator, interval, threshold range)."""


class ParseError(SastlError):
    """Syntax error in formula text. Carries the offending source span."""

    def __init__(self, message: str, span: "object | None" = None):
        super().__init__(message)
        self.span = span


class ValidationError(SastlError):
    """Semantic error found when checking a formula against a deployment.

    Examples: unknown variable or proposition, counting threshold above the
    location count. Carries the span of the offending node when available.
    """

    def __init__(self, message: str, span: "object | None" = None):
        super().__init__(message)
        self.span = span


class TemplateError(SastlError):
    """Missing or contradictory slots in a structured requirement template."""


class IncompleteTraceError(SastlError):
    """The formula horizon extends past the end of the trace (offline mode)."""

    def __init__(self, first_missing_sample: int, required_through: float):
        super().__init__(
            f"trace ends before the formula horizon: first missing sample "
            f"{first_missing_sample}, data required through t={required_through:g}"
        )
        self.first_missing_sample = first_missing_sample
        self.required_through = required_through


class EvaluationError(SastlError):
    """A spatial worker failed; names the location being evaluated."""

    def __init__(self, location: str, cause: str):
        super().__init__(f"evaluation failed at location {location!r}: {cause}")
        self.location = location
        self.cause = cause


class StreamError(SastlError):
    """Out-of-order or otherwise unacceptable online input."""

    def __init__(self, message: str, timestamp: "float | None" = None):
        super().__init__(message)
        self.timestamp = timestamp


class ConfigError(SastlError):
    """Invalid monitor configuration (window too small, bad worker count)."""
