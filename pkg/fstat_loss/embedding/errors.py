"""Exceptions raised by the embedding package.

All of them derive from builtin exceptions so callers that only know about
``ValueError`` or ``RuntimeError`` keep working.
"""


class DomainError(ValueError):
    """Argument outside the domain of a special function."""


class SingularityError(DomainError):
    """Density evaluated at an endpoint where it is unbounded."""


class DegenerateClassError(ValueError):
    """A label has fewer than 2 members, so its within-class variance is undefined."""


class InsufficientClassesError(ValueError):
    """Fewer than 2 distinct labels in a batch."""


class ConfigError(ValueError):
    """Invalid configuration value or unknown configuration key."""


class ShapeError(ValueError):
    """Array dimensions do not match."""


class EmptyTripletError(ValueError):
    """No (anchor, positive, negative) triplet can be formed."""


class InsufficientDataError(ValueError):
    """A sampler cannot build an episode from the available instances."""


class DataError(ValueError):
    """Non-finite or otherwise unusable data."""


class SizeError(ValueError):
    """A factorial dataset is too large to enumerate."""


class TrainingDivergenceError(RuntimeError):
    """Loss or gradient became non-finite during training."""
