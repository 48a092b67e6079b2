"""Exception hierarchy.

Solvers catch the iteration-domain errors (``AufbauDegenerate``,
``RetractionRankMismatch``, ``NonphysicalDensity``) and turn them into a
termination reason on the returned trace; everything else propagates.
"""


class GrassmannError(Exception):
    """Base class for all errors raised by this package."""


class NotAProjector(GrassmannError, ValueError):
    pass


class RetractionRankMismatch(GrassmannError):
    """The matrix to retract does not have exactly N eigenvalues above 1/2."""


class EigensolverFailure(GrassmannError):
    pass


class NonphysicalDensity(GrassmannError, ValueError):
    """A density entry is negative where the energy needs a fractional power."""


class AufbauDegenerate(GrassmannError):
    """No gap between the N-th and (N+1)-th eigenvalues."""


class GapTooSmall(GrassmannError):
    pass


class NotCritical(GrassmannError, ValueError):
    pass


class InsufficientData(GrassmannError, ValueError):
    pass


class LineSearchFailure(GrassmannError):
    pass


class ConfigError(GrassmannError, ValueError):
    pass
