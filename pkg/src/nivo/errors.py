"""Exception types raised across the package."""


class NivoError(Exception):
    """Base class for all package errors."""


class ConfigError(NivoError, ValueError):
    """Invalid parameter or mismatched dimensions."""


class DataError(NivoError, ValueError):
    """Non-finite or otherwise unusable numeric input."""


class LoadError(NivoError, OSError):
    """A dataset or trajectory file could not be read."""


class DegeneratePairError(NivoError):
    """Two plane-normal pairs do not determine a unique rotation."""


class InconsistentPairError(NivoError):
    """The rotation from one pair does not explain the other pair."""


class InsufficientDataError(NivoError):
    """Not enough associated samples for the requested computation."""
