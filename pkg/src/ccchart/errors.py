"""Exception types raised across the package."""

from __future__ import annotations


class CapabilityChartError(Exception):
    """Base class for all package errors."""


class InvalidInputError(CapabilityChartError, ValueError):
    """Non-finite values, bad voltages, inconsistent designs or directions."""


class WrongIndicatorError(CapabilityChartError, ValueError):
    """An indicator was called with a design it does not apply to."""


class CapacityGuardError(CapabilityChartError, ValueError):
    """Allocation enumeration refused because the leg count is too large."""


class UnboundedDirectionError(CapabilityChartError, ValueError):
    pass


class InvalidGridError(CapabilityChartError, ValueError):
    pass


class DegenerateChartError(CapabilityChartError, ValueError):
    """Size ratio requested against a zero-measure chart."""


class InvalidStepError(CapabilityChartError, ValueError):
    pass
