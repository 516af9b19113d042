"""Exception hierarchy shared by all modules."""


class SplitConfError(Exception):
    """Base class for errors raised by this package."""


class DomainError(SplitConfError, ValueError):
    """An argument lies outside the domain of an operation."""


class CapabilityError(SplitConfError, TypeError):
    """A loss model lacks a component that the requested method needs."""


class SingularityError(DomainError):
    """A Gram matrix is numerically singular."""


class UnsupportedDimensionError(DomainError):
    """An estimator was asked to work in a dimension it does not support."""


class ConfigError(SplitConfError):
    """A configuration file or preset could not be parsed or validated."""

    def __init__(self, message, line=None, key=None):
        self.line = line
        self.key = key
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
