"""Exception hierarchy shared by every module."""


class PSMissingError(Exception):
    """Base class for all errors raised by psmissing."""


class GraphError(PSMissingError, ValueError):
    """Malformed graph, unknown node id, or an invalid graph operation."""


class ConditioningError(GraphError):
    """Conditioning spec out of causal order or inconsistent with the setting."""


class ModelError(PSMissingError, ValueError):
    """Invalid structural model (mechanism tables, probabilities, setting)."""


class ParseError(PSMissingError, ValueError):
    """Syntax or semantic error in a model file."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class IdentificationError(PSMissingError):
    """An identification assumption or positivity condition fails on the data."""


class PositivityError(IdentificationError):
    pass


class MonotonicityError(IdentificationError):
    pass


class AssumptionError(IdentificationError):
    pass


class RecoveryError(IdentificationError):
    """Missing-outcome recovery hit a cell with no responders."""
