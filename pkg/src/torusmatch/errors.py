"""Exception types shared across the package."""


class TorusMatchError(Exception):
    """Base class for all package-specific errors."""


class DomainError(TorusMatchError, ValueError):
    """An argument is outside the documented domain of an operation."""


class ConfigurationError(TorusMatchError, ValueError):
    """An input combination is structurally invalid (divisibility, scheme
    availability, parameter inequalities)."""


class IntegrityError(TorusMatchError):
    """A validated data structure failed its internal consistency check."""


class WitnessFailureError(TorusMatchError):
    """A decomposition-witness step produced an empty or unusable result."""


class InternalInvariantError(TorusMatchError, RuntimeError):
    """An algorithm reached a state its own invariants rule out; never
    silently continued."""
