"""Exception hierarchy.

Every error carries a stable ``exit_code`` used by the command line front end.
"""

from __future__ import annotations


class HmmEquivError(Exception):
    """Base class for all library errors."""

    exit_code = 1


class ValidationError(HmmEquivError):
    """A model, distribution or generator set failed validation."""

    exit_code = 2

    def __init__(self, message, violations=None):
        super().__init__(message)
        self.violations = list(violations or [])


class IndeterminateError(HmmEquivError):
    """A numerical decision fell inside an indeterminate band."""

    exit_code = 3

    def __init__(self, message, value=None, band=None):
        super().__init__(message)
        self.value = value
        self.band = band


class CrossCheckError(HmmEquivError):
    """Two independent computations of the same quantity disagree."""

    exit_code = 4


class ReducibleError(HmmEquivError):
    """The hidden chain is not irreducible."""

    exit_code = 5

    def __init__(self, message, components=None):
        super().__init__(message)
        self.components = components


class ConditionError(HmmEquivError):
    """A genericity precondition (E1, E2, E3, full support ...) does not hold."""

    exit_code = 6


class EnumerationCapError(HmmEquivError):
    """An exhaustive enumeration would exceed the configured cap."""

    exit_code = 7


class PerronError(HmmEquivError):
    """The Perron eigenpair could not be computed to tolerance."""

    exit_code = 8


class InconsistentSystemError(HmmEquivError):
    """A linear system has no solution within tolerance."""

    exit_code = 9


class OverflowGuardError(HmmEquivError):
    """An exponential tilt would overflow double precision."""

    exit_code = 10
