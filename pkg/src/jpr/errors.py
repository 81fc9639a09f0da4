"""Exception hierarchy shared by every jpr module."""

from __future__ import annotations

import functools
from typing import Callable, TypeVar

F = TypeVar("F", bound=Callable)


class JPRError(ValueError):
    """Base class for all domain errors.

    ``operation`` names the ``module.function`` that failed; it is filled in
    by the :func:`operation` decorator so the CLI can report where a
    computation broke.
    """

    operation: str | None = None

    def __str__(self) -> str:
        msg = super().__str__()
        if self.operation:
            return f"{self.operation}: {msg}"
        return msg


class InvalidSeriesError(JPRError):
    pass


class EmptySeriesError(JPRError):
    pass


class ConstantSeriesError(JPRError):
    pass


class LagTooLargeError(JPRError):
    pass


class DegreesOfFreedomError(JPRError):
    pass


class ProbabilityOutOfRangeError(JPRError):
    pass


class EmptySamplesError(JPRError):
    pass


class KOutOfRangeError(JPRError):
    pass


class NotSymmetricError(JPRError):
    pass


class NotPositiveDefiniteError(JPRError):
    pass


class SeriesTooShortError(JPRError):
    pass


class InitialValuesLengthError(JPRError):
    pass


class PeriodInvalidError(JPRError):
    pass


class LengthMismatchError(JPRError):
    pass


class NotFittedError(JPRError):
    pass


class SingularSystemError(JPRError):
    pass


class AllFitsFailedError(JPRError):
    pass


class NoResidualsError(JPRError):
    pass


class ParseError(JPRError):
    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class InconsistentHorizonError(JPRError):
    pass


class BlockLengthError(JPRError):
    pass


class MeanBlockError(JPRError):
    pass


class DegenerateColumnError(JPRError):
    pass


class RankDeficientError(JPRError):
    pass


class HorizonMismatchError(JPRError):
    pass


class InfiniteBoundError(JPRError):
    pass


class ConfigError(JPRError):
    pass


class ConfigTooLargeError(ConfigError):
    pass


class EmptyReportError(JPRError):
    pass


class BootstrapSizeWarning(UserWarning):
    """Emitted when fewer than 1000 bootstrap replicates are requested."""


def operation(name: str) -> Callable[[F], F]:
    """Tag JPRErrors escaping the wrapped function with ``name``.

    The innermost tagged operation wins, so a failure deep in a pipeline is
    reported against the function that actually detected it.
    """

    def deco(fn: F) -> F:
        @functools.wraps(fn)
        def wrapper(*args, **kwargs):
            try:
                return fn(*args, **kwargs)
            except JPRError as exc:
                if exc.operation is None:
                    exc.operation = name
                raise

        return wrapper  # type: ignore[return-value]

    return deco
