"""Exception types shared across the package."""


class GspError(Exception):
    """Base class for errors raised by this package."""


class ConfigError(GspError):
    """An experiment configuration is malformed or inconsistent."""


class DomainError(GspError):
    """An input lies outside the mathematical domain of an operation."""


class IntegrationFailure(GspError):
    """The adaptive ODE controller could not meet its tolerance."""


class InvariantBreach(GspError):
    """A physicality invariant was violated beyond tolerance."""


class DegenerateCovariance(GspError):
    """Second cumulants with non-positive determinant."""


class DegenerateLine(GspError):
    """Phase-space line with non-positive marginal spread for this state."""


class InvalidDensity(GspError):
    """A tomogram value admits no Gaussian parameters (log of a non-positive
    argument, or an empty feasible region for the spread)."""


class NoCommonRoot(GspError):
    """The per-point root sets of a transcendental inversion share no value
    within tolerance; the data are inconsistent or too noisy."""


class NoBracket(GspError):
    """A 1-D root search found no sign change on its search interval."""


class MultipleRoots(GspError):
    """A 1-D root search found more than one root and no tie-breaker."""

    def __init__(self, message, roots):
        super().__init__(message)
        self.roots = tuple(float(r) for r in roots)


class QuadratureFailure(GspError):
    """Adaptive quadrature did not reach its requested accuracy."""


class DivisionNearZero(GspError):
    """A measured denominator is too close to zero to carry information."""


class RobertsonBreachWarning(UserWarning):
    """Reconstructed second cumulants violate the uncertainty bound; the
    value is still returned."""
