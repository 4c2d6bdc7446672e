"""Exception types raised by the package."""


class DomainError(ValueError):
    """An angle or parameter lies outside its admissible range."""


class DegenerateGeometryError(ValueError):
    """Coincident anchors or an otherwise unusable scenario layout."""


class DegenerateChannelError(ArithmeticError):
    """The effective channel vanishes, so no beamformer is defined."""


class ConfigError(ValueError):
    """Malformed or incomplete experiment configuration."""


class NumericalError(ArithmeticError):
    """A result came out non-finite where a finite value is required."""
