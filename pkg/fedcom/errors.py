"""
Exception types raised by the FedCom library and simulator.
"""

from typing import Optional


class FedComError(ValueError):
    """Base class for all FedCom errors."""


class InvalidArgumentError(FedComError):
    """An argument is outside its allowed range."""


class ParseError(FedComError):
    """A CSV cell could not be parsed."""

    def __init__(self, message: str, row: Optional[int] = None, column: Optional[str] = None):
        location = []
        if row is not None:
            location.append(f"row {row}")
        if column is not None:
            location.append(f"column '{column}'")
        suffix = f" ({', '.join(location)})" if location else ""
        super().__init__(f"{message}{suffix}")
        self.row = row
        self.column = column


class MissingColumnError(FedComError):
    """A requested CSV column does not exist."""


class InfeasiblePartitionError(FedComError):
    """The requested partition cannot be built from the dataset."""


class DimensionMismatchError(FedComError):
    """Feature or parameter dimensions do not agree."""


class EmptyInputError(FedComError):
    """An operation received an empty dataset or sequence."""


class TooFewUpdatesError(FedComError):
    """Not enough updates for the requested Krum neighbourhood."""


class ConfigError(FedComError):
    """The run configuration is malformed or invalid."""


class SimulationError(FedComError):
    """A workflow node failed during a simulation run."""
