"""Exception types raised by the library."""


class GbmFeynmanError(Exception):
    """Base class for all library errors."""


class NonMonotoneVariance(GbmFeynmanError, ValueError):
    """The variance function b is not strictly increasing on the grid."""


class GridMismatch(GbmFeynmanError, ValueError):
    """Elements and/or sample paths live on different time grids."""


class NonFinite(GbmFeynmanError, ArithmeticError):
    """A quadrature produced an infinite or NaN value."""


class InvalidParameter(GbmFeynmanError, ValueError):
    """A scalar parameter is outside its admissible range."""


class ConfigError(GbmFeynmanError, ValueError):
    """An experiment configuration failed to parse or validate."""
