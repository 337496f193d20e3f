"""Exception types shared across the package."""


class ProtoalignError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(ProtoalignError):
    """Input data violates a documented schema or precondition."""


class DimensionError(ValidationError):
    """Tensor or array shapes do not agree."""


class DegenerateInputError(ValidationError):
    """Numerically degenerate input (e.g. a near-zero vector)."""


class DegenerateIntervalError(ValidationError):
    """A time interval selects no frames or has non-positive length."""


class ParameterError(ValidationError):
    """A configuration value is outside its allowed range."""


class FormatError(ProtoalignError):
    """A binary file does not match its documented layout."""


class SamplingError(ProtoalignError):
    """A dataset subset cannot be drawn as requested."""


class TrainingError(ProtoalignError):
    """Optimization failed (non-finite loss or gradient)."""


class DeterminismError(ProtoalignError):
    """A loss function evaluated twice with different results."""


class DiagnosticError(ProtoalignError):
    """A diagnostic was requested on state that cannot support it."""
