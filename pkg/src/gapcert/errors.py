"""Exception types shared across the package."""


class GapcertError(Exception):
    """Base class for all package-specific errors."""


class InvalidDimensionError(GapcertError, ValueError):
    """A matrix or lattice dimension is out of range."""


class InvalidRankError(GapcertError, ValueError):
    """A projector rank violates the constraints of the requested construction."""


class DomainError(GapcertError, ValueError):
    """A numeric argument lies outside the domain where a formula is asserted."""


class NotAProjectorError(GapcertError, ValueError):
    """An input matrix is not (numerically) a symmetric idempotent."""


class SolverConvergenceError(GapcertError, RuntimeError):
    """The iterative eigensolver hit its iteration cap without converging."""


class ConstructionError(GapcertError, RuntimeError):
    """A randomized construction failed to satisfy its target after retries."""


class ConfigError(GapcertError, ValueError):
    """An experiment configuration is malformed or violates domain constraints."""
