"""Exception hierarchy shared by every simulation layer."""


class HybridError(Exception):
    """Base class for all package errors."""


class InvalidParameter(HybridError, ValueError):
    pass


class TruncationError(HybridError):
    """Raised when probability leaks into the top levels of the Fock cutoff."""

    def __init__(self, message, step=None):
        if step is not None:
            message = f"{message} (step {step})"
        super().__init__(message)
        self.step = step


class NumericalBlowup(HybridError):
    def __init__(self, message, step=None):
        if step is not None:
            message = f"{message} (step {step})"
        super().__init__(message)
        self.step = step


class DegenerateSuperposition(HybridError):
    pass


class DegenerateState(HybridError):
    pass


class NonHermitian(HybridError, ValueError):
    pass


class UnsupportedPotential(HybridError):
    pass


class InvalidDensityMatrix(HybridError, ValueError):
    pass


class DimensionMismatch(HybridError, ValueError):
    pass


class ConfigError(HybridError):
    """Configuration failed validation.

    ``path`` is the dotted field path of the offending entry.
    """

    def __init__(self, path, reason):
        super().__init__(f"{path}: {reason}")
        self.path = path
        self.reason = reason


class EnsembleFailure(HybridError):
    pass
