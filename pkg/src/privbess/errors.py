"""Exception hierarchy shared across the package."""


class PrivBessError(Exception):
    """Base class for all package errors."""


class InvalidTopologyError(PrivBessError, ValueError):
    """Adjacency is not a symmetric 0/1 matrix with zero diagonal."""


class SpectralError(PrivBessError, ValueError):
    """Spectral query on a matrix with no usable spectrum."""


class DisconnectedGraphError(SpectralError):
    """The matrix has no strictly positive eigenvalue."""


class ConfigError(PrivBessError, ValueError):
    """Invalid scenario configuration.

    ``line`` is the 1-based line in the source document when known.
    """

    def __init__(self, message, *, key=None, line=None):
        self.key = key
        self.line = line
        prefix = ""
        if line is not None:
            prefix = f"line {line}: "
        if key is not None:
            prefix += f"{key}: "
        super().__init__(prefix + message)


class IntegrationError(PrivBessError, RuntimeError):
    """A run stopped early. ``trace`` holds the samples up to ``last_valid_t``."""

    def __init__(self, message, *, last_valid_t, trace=None):
        self.last_valid_t = last_valid_t
        self.trace = trace
        super().__init__(f"{message} (last valid t={last_valid_t:.6g})")


class SocBoundViolation(IntegrationError):
    """A unit's SoC left [soc_floor, soc_ceiling]."""
