"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the supported domain of an operation."""


class IntegrationError(RuntimeError):
    """Adaptive quadrature could not reach the requested tolerance."""


class FactorizationError(RuntimeError):
    """A symmetric factorization broke down beyond the perturbation tolerance."""


class TruncationError(RuntimeError):
    """Angular-momentum truncation could not be certified within the channel cap."""


class ConfigError(ValueError):
    """Invalid run configuration (maps to CLI exit status 2)."""
