"""Shared exception types."""


class ParameterError(ValueError):
    """An argument fell outside its documented domain."""


class GridError(RuntimeError):
    """A curve operation could not be completed on the given grid."""
