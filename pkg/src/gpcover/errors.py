"""Exception types shared across the library."""


class GPCoverError(Exception):
    """Base class for library-specific failures."""


class OutsideDomainError(GPCoverError, ValueError):
    """A position lies outside the workspace rectangle."""


class SingularityError(GPCoverError, ArithmeticError):
    """A gram-matrix extension is numerically rank-deficient."""


class ConfigurationError(GPCoverError, ValueError):
    """A run configuration violates a documented bound."""


class DecentralizationError(GPCoverError):
    """Agent state was read outside the sanctioned exchange channels."""
