"""Exception hierarchy.

All library errors derive from :class:`WeakboundError`.  The CLI maps
configuration problems to exit code 2 and solver problems to exit code 3.
"""


class WeakboundError(Exception):
    """Base class for library errors."""


class ConfigError(WeakboundError, ValueError):
    """Invalid experiment configuration, graph file or potential expression."""


class EmptyInputError(WeakboundError, ValueError):
    """An eigensolver received a matrix of dimension 0."""


class InvalidMatrixError(WeakboundError, ValueError):
    """Non-finite, mis-shaped or non-symmetric matrix data."""


class InvalidPotentialError(WeakboundError, ValueError):
    """Potential samples that are negative, non-finite or identically zero."""


class InvalidGraphError(WeakboundError, ValueError):
    """Structurally invalid metric graph (bad vertex index, length, isolated vertex)."""


class DomainError(WeakboundError, ValueError):
    """Spectral parameter outside the admissible range (e.g. nu >= 0)."""


class SolverError(WeakboundError, RuntimeError):
    """A numerical solver failed."""


class ConvergenceError(SolverError):
    """Iteration limit reached.  ``last`` holds the final iterate."""

    def __init__(self, msg, last=None, iterations=None):
        super().__init__(msg)
        self.last = last
        self.iterations = iterations


class NoBoundStateError(SolverError):
    """No negative eigenvalue could be bracketed for the given coupling."""


class ReconstructionError(SolverError):
    """The reconstructed eigenfunction vanished numerically."""


class TruncationError(SolverError):
    """The truncated half-line is too short for the bound state's decay length."""
