"""Exception hierarchy shared by all modules."""


class PansError(Exception):
    """Base class for all library errors."""


class InvalidInputError(PansError, ValueError):
    """Malformed data passed to an operation (shape mismatch, bad labels, ...)."""


class NonFiniteError(InvalidInputError):
    """NaN or Inf encountered where finite values are required."""


class InvalidConfigError(PansError, ValueError):
    """A configuration value violates its invariants."""


class InvalidModelError(PansError, ValueError):
    """A prototype bank violates its invariants (e.g. zero-norm prototype)."""


class UndefinedMetricError(PansError, ValueError):
    """A metric is undefined for the given data (e.g. no positive pixels)."""


class FormatError(PansError, ValueError):
    """A file does not conform to its on-disk format."""
