"""Exception types shared across the package."""


class ExpmrfError(Exception):
    """Base class for all package errors."""


class DomainError(ExpmrfError, ValueError):
    """A canonical parameter or model parameter left its valid domain."""


class OverflowLimitError(ExpmrfError, OverflowError):
    """A quantity exceeded an explicit overflow guard (e.g. Poisson exp(eta))."""


class TooLargeError(ExpmrfError, ValueError):
    """Exact enumeration/quadrature was requested beyond its size limits."""


class NotNormalizableError(ExpmrfError, ValueError):
    """The joint density has no finite normalizing constant."""


class NotSquareError(ExpmrfError, ValueError):
    """A lattice was requested for a node count that is not a perfect square."""


class MissingFitError(ExpmrfError, ValueError):
    """A per-node fit required for stitching is absent or mislabeled."""


class ParseError(ExpmrfError, ValueError):
    """A data or config file could not be parsed; message carries location."""


class SupportError(ExpmrfError, ValueError):
    """A data value lies outside the family support; message names the cell."""
