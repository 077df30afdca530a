"""Exceptions raised by the energyforge pipeline."""

from __future__ import annotations


class EnergyForgeError(RuntimeError):
    """Base class for all pipeline failures."""


class SpecError(EnergyForgeError):
    """Raised when a flow spec or run configuration is invalid."""


class ExpressionSyntaxError(SpecError):
    """Raised when a field expression cannot be parsed."""

    def __init__(self, message: str, column: int, text: str = "") -> None:
        super().__init__(f"{message} at column {column}" + (f" in {text!r}" if text else ""))
        self.column = column
        self.text = text


class IntegrationError(EnergyForgeError):
    """Raised when a trajectory cannot be integrated."""


class DomainExitError(IntegrationError):
    """Raised when an orbit leaves a plane-disk domain."""


class EventPreconditionError(IntegrationError):
    """Raised when an event function already vanishes at the start point."""


class EventNotFoundError(IntegrationError):
    """Raised when an event function does not change sign within t_max."""


class HyperbolicityError(EnergyForgeError):
    """Raised when the flow has a non-hyperbolic or non-isolated recurrent piece."""

    def __init__(self, message: str, location=None) -> None:
        super().__init__(message)
        self.location = location


class OrderingError(EnergyForgeError):
    """Raised when the Smale relation cannot be extended to a total order."""


class ScaffoldError(EnergyForgeError):
    """Raised when a stage of the energy construction fails."""

    def __init__(self, message: str, stage: int) -> None:
        super().__init__(f"stage {stage}: {message}")
        self.stage = stage


class OutOfChartError(EnergyForgeError):
    """Raised when a local chart is evaluated outside its ball."""
