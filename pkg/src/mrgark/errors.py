"""Exception types shared across the package."""


class MrgarkError(Exception):
    """Base class for all package-specific errors."""


class ConstraintError(MrgarkError, ValueError):
    """A multirate ratio or parameter violates a scheme constraint."""


class CatalogError(MrgarkError, KeyError):
    """Unknown method name requested from the catalog."""


class ConvergenceError(MrgarkError, RuntimeError):
    """Newton iteration failed to converge; carries the solve statistics."""

    def __init__(self, message, stats=None):
        super().__init__(message)
        self.stats = stats


class StructureError(MrgarkError, ValueError):
    """Stage coupling structure is not one of the supported solvable forms."""
