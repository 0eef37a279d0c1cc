"""Exception hierarchy. Everything raised on purpose derives from
AlphaVortexError so the CLI can turn it into a one-line error message."""


class AlphaVortexError(Exception):
    pass


class KernelDomainError(AlphaVortexError, ValueError):
    """Kernel function called outside its domain (negative radius, etc.)."""


class DiagnosticError(AlphaVortexError):
    """A diagnostic procedure could not certify its result."""


class SupportError(AlphaVortexError, ValueError):
    """Initial data sticks out of the declared bounding box."""

    def __init__(self, message, overflow_fraction):
        super().__init__(message)
        self.overflow_fraction = overflow_fraction


class MollifyResolutionError(AlphaVortexError, ValueError):
    """Grid too coarse for the requested mollification width."""


class PicardConvergenceError(AlphaVortexError):
    """Fixed-point iteration hit max_iter before reaching tolerance."""

    def __init__(self, message, g_history):
        super().__init__(message)
        self.g_history = tuple(g_history)


class BoundViolationError(AlphaVortexError):
    """A runtime bound assertion failed."""

    def __init__(self, message, worst_point, value, bound):
        super().__init__(message)
        self.worst_point = worst_point
        self.value = value
        self.bound = bound


class GridCoverageError(AlphaVortexError, ValueError):
    """Diagnostic grid does not cover the required region."""

    def __init__(self, message, required_box):
        super().__init__(message)
        self.required_box = required_box


class ConfigError(AlphaVortexError, ValueError):
    """Malformed or inconsistent simulation configuration."""


class SnapshotError(AlphaVortexError):
    """Snapshot file could not be written or parsed."""
