"""Error hierarchy shared by all subpackages."""
from __future__ import annotations


class RoutingLabError(Exception):
    """Base class for all errors raised by this package."""


class InvalidGraphParameters(RoutingLabError, ValueError):
    """Node count / degree combination violates the generator preconditions."""


class GraphConstructionError(RoutingLabError):
    """No connected regular graph was found within the retry budget."""


class GraphFormatError(RoutingLabError):
    """A graph file could not be parsed or violates graph invariants."""

    def __init__(self, message: str, location: str | None = None):
        self.location = location
        super().__init__(f"{location}: {message}" if location else message)


class ShapeMismatchError(RoutingLabError, ValueError):
    """Array dimensions do not match what a layer expects."""


class InvalidActionError(RoutingLabError, ValueError):
    """An action index lies outside [0, D]."""


class UnknownEdgeError(RoutingLabError, KeyError):
    """An edge referenced by a delay override does not exist."""


class NoLegalActionError(RoutingLabError):
    """Masked action selection found no legal action (drop the packet)."""


class EmptyTraceError(RoutingLabError):
    """Episode metrics requested for a trace without steps."""


class NonFiniteLossError(RoutingLabError):
    """Training produced a NaN or infinite loss."""

    def __init__(self, message: str, diagnostics: dict | None = None):
        self.diagnostics = diagnostics or {}
        detail = ", ".join(f"{k}={v}" for k, v in self.diagnostics.items())
        super().__init__(f"{message} ({detail})" if detail else message)


class CheckpointError(RoutingLabError):
    """A checkpoint file is unreadable or has an unexpected version tag."""


class MissingInputError(RoutingLabError, FileNotFoundError):
    """A graph suite, dataset or checkpoint named on the command line does not exist."""
