"""Exception types shared across the package.

Invalid arguments raise plain ``ValueError`` everywhere; the classes here
cover runtime failures that callers may want to catch selectively.
"""

from __future__ import annotations


class TacoError(Exception):
    """Base class for runtime failures of the auction engine."""


class NoTerminationError(TacoError):
    """The auction hit its step cap before the termination test passed.

    Carries the partial trace so callers can inspect how far the run got.
    """

    def __init__(self, message: str, steps: int, trace: list):
        super().__init__(message)
        self.steps = steps
        self.trace = trace


class HistoryLimitError(TacoError):
    """The recorded-state history exceeded its configured entry cap."""


class ResourceLimitError(TacoError):
    """A requested computation is too large to enumerate (e.g. factorial blowup)."""


class MetricUndefinedError(TacoError):
    """A metric has no defined value for the given inputs (e.g. zero-cost optimum)."""
