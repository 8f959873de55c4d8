"""Exception types raised by clicktomo."""


class TomographyError(ValueError):
    """Base class for all clicktomo errors."""


class DomainError(TomographyError):
    """An argument lies outside the domain of a formula."""


class TruncationError(TomographyError):
    """The Fock-space truncation cuts off too much probability mass."""


class CountsError(TomographyError):
    """Raw click counts violate the cumulative-threshold contract."""


class ShapeError(TomographyError):
    """Matrix shapes do not conform."""


class DimensionError(TomographyError):
    """A POVM is too small to define the requested quantity."""


class PovmError(TomographyError):
    """A POVM matrix is not row-stochastic."""
