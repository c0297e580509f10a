"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain of the operation."""


class MeasureError(ValueError):
    """The Lévy measure violates a structural requirement."""


class NoMassError(ValueError):
    """Sampling was requested from a region carrying zero Lévy mass."""


class ConfigError(ValueError):
    """An experiment or coupling configuration is inconsistent."""


class InvariantViolation(RuntimeError):
    """A path-wise coupling invariant failed during a replication."""


class OracleUnavailable(RuntimeError):
    """The Fourier oracle cannot be evaluated reliably for this measure."""
