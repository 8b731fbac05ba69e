"""Exceptions raised on the documented refusal paths, each with its CLI exit code."""


class DQWError(Exception):
    """Base class for all errors raised by decoherent_walk."""

    exit_code = 1


class GraphFormatError(DQWError, ValueError):
    """The edge-list text could not be parsed into a valid graph."""

    exit_code = 3


class GapCollisionError(DQWError):
    """The Laplacian spectrum violates the gap-uniqueness assumption."""

    exit_code = 4

    def __init__(self, msg:str, report=None):
        super().__init__(msg)

        # Keep the full report so that callers can surface every collision
        self.report = report


class SizeLimitError(DQWError):
    """The graph is too large for the requested method."""

    exit_code = 5


class DegeneracyError(DQWError):
    """Eigenvalues coincide where the formulas need them to be distinct."""

    exit_code = 6


class NotSupportedError(DegeneracyError):
    """Degenerate structure deeper than one level of partitioning."""


class NumericalError(DQWError, ArithmeticError):
    """NaN, overflow or a solver which did not converge."""

    exit_code = 7


class StateError(DQWError, ValueError):
    """An initial state which is not a valid density matrix or vector."""

    exit_code = 8


class GraphGenerationError(DQWError):
    """A graph family could not produce a usable graph within the retry bound."""

    exit_code = 9
