"""Exception types raised across the package."""


class PrecodesimError(Exception):
    """Base class for all package-specific errors."""


class DimensionError(PrecodesimError, ValueError):
    """Shapes or index ranges are inconsistent with the requested operation."""


class NumericalError(PrecodesimError, RuntimeError):
    """A numerical routine failed to produce a usable result."""


class NotHpdError(NumericalError):
    """A matrix expected to be Hermitian positive definite is not."""


class SingularGramError(NumericalError):
    """The Gram matrix of the precoding basis is numerically singular."""


class RankDeficiencyError(PrecodesimError, ValueError):
    """A user channel does not support the requested number of layers."""


class SelectionError(PrecodesimError, RuntimeError):
    """No user subset satisfying the correlation threshold could be found."""


class ZeroMatrixError(PrecodesimError, ValueError):
    """An all-zero matrix was passed where a nonzero one is required."""


class ZeroSinrError(PrecodesimError, ValueError):
    """A nonpositive SINR reached a geometric-mean aggregation."""


class ConfigError(PrecodesimError, ValueError):
    """Invalid configuration values."""
