"""Exception types shared across the package."""


class NecktreeError(Exception):
    """Base class for all package errors."""


class ConfigError(NecktreeError):
    """A configuration value is missing, malformed, or inconsistent."""


class ParameterError(NecktreeError):
    """An argument is outside its documented domain."""


class PreconditionError(NecktreeError):
    """A documented precondition of an operation does not hold."""


class ResourceError(NecktreeError):
    """A node or memory budget was exceeded before completion."""


class UnsupportedModelError(NecktreeError):
    """The requested operation is undefined for this sampling model."""


class HorizonError(NecktreeError):
    """No neck was found within the configured search horizon."""


class ExtinctionError(NecktreeError):
    """All branches of the sampled tree died before the operation finished."""


class GeometryError(NecktreeError):
    """Geometric data is missing or violates a separation requirement."""
