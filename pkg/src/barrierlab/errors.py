"""Exception types shared across the package.

Every failure mode the library reports deliberately (domain violations,
precondition failures, solver non-convergence, quadrature drift, config
problems) gets its own class so callers and the CLI can map them to exit
codes without string matching.
"""


class BarrierLabError(Exception):
    """Base class for all library errors."""


class DomainError(BarrierLabError):
    """A point lies outside (or too close to the boundary of) a barrier domain."""


class PreconditionError(BarrierLabError):
    """An operation's stated precondition does not hold for the given inputs."""


class ConstructionError(BarrierLabError):
    """An object (grid, operator, barrier) cannot be built from the inputs."""


class NonConvergenceError(BarrierLabError):
    """An iterative solver hit its iteration cap before reaching tolerance.

    Attributes
    ----------
    residuals : object
        Best residuals (or Newton decrement) achieved before giving up.
    """

    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = residuals


class DegenerateGapError(BarrierLabError):
    """The two lowest eigenvalues coincide within the degeneracy tolerance."""


class QuadratureError(BarrierLabError):
    """A quadrature self-check (node doubling) drifted beyond tolerance."""


class NormalizationError(BarrierLabError):
    """A vector that must be a unit state / probability mass is not."""


class ConfigError(BarrierLabError):
    """An experiment spec file is malformed or inconsistent."""
