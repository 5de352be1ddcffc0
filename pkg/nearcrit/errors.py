"""Exception hierarchy."""


class NearcritError(Exception):
    """Base class for every error raised by the package."""


class WindowError(NearcritError, ValueError):
    """Malformed, oversized or misplaced lattice window."""


class UndecidedError(NearcritError, RuntimeError):
    """A Monte Carlo decision could not be reached within its budget."""


class TooManyHolesError(NearcritError, ValueError):
    """Exact subset enumeration over holes refused for a large instance."""


class BackendDomainError(NearcritError, ValueError):
    """Root finding left the domain of a scale backend."""


class RenderError(NearcritError, ValueError):
    """Image cannot be produced with the requested settings."""


class ExperimentError(NearcritError, ValueError):
    """Unknown experiment or invalid experiment parameters."""
