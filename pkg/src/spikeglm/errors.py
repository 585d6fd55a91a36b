"""Exception taxonomy shared across the package."""


class SpikeGLMError(Exception):
    """Base class for every error this package raises on purpose."""


class ParameterError(SpikeGLMError, ValueError):
    """A numeric argument is outside its valid range."""


class StructureError(SpikeGLMError, ValueError):
    """Shapes, indices, or wiring are mutually inconsistent."""


class DataError(SpikeGLMError, ValueError):
    """An input file, raster, or stream holds values the format forbids."""


class ConfigError(SpikeGLMError, ValueError):
    """A run configuration is missing, malformed, or holds unknown keys."""


class CapacityError(SpikeGLMError, ValueError):
    """An exact computation was requested beyond its enumeration budget."""
