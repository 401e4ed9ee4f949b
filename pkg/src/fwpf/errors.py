"""Exception hierarchy shared by the simulation modules."""


class FwpfError(Exception):
    """Base class for all package errors."""


class DomainError(FwpfError, ValueError):
    """Non-finite or out-of-range input to a model function."""


class SingularityError(FwpfError):
    """Airspeed fell to the division guard (v <= eps_v)."""


class GeometryError(FwpfError):
    """Degenerate path geometry (zero-length tangent, bad table)."""


class PathDomainError(FwpfError, ValueError):
    """Arc parameter outside the domain of a sampled path."""


class LyapunovError(FwpfError):
    """Lyapunov equation has no positive definite solution."""


class IntegrationFault(FwpfError):
    """Non-finite state produced by the integrator."""

    def __init__(self, message, component=None, t=None):
        super().__init__(message)
        self.component = component
        self.t = t


class ConfigError(FwpfError):
    """Malformed scenario configuration."""
