"""Exception hierarchy shared across the package."""


class UroeventError(Exception):
    """Base class for all package-specific errors."""


class ParseError(UroeventError):
    """A trace or annotation file could not be parsed."""


class ValidationError(UroeventError):
    """Parsed data violates an invariant (non-finite sample, bad interval, ...)."""


class UnsupportedRateError(UroeventError):
    """Sampling rate outside the supported set {10, 100} Hz."""


class SignalTooShortError(UroeventError):
    """Signal too short for a 5-level decomposition."""


class NonFiniteInputError(UroeventError):
    """Input contains NaN or infinity."""


class ShapeMismatchError(UroeventError):
    """Coefficient series shapes are inconsistent with the stated source length."""


class RateMismatchError(UroeventError):
    """Operation requires a 10 Hz trace."""


class TooFewRowsError(UroeventError):
    """Not enough rows to fit statistics."""


class TooFewRowsPerClassError(UroeventError):
    """A class has fewer rows than the neighbour count requires."""


class DimensionMismatchError(UroeventError):
    """Feature dimension does not match the model input layer."""


class NonFiniteLossError(UroeventError):
    """Training loss became NaN or infinite."""


class MissingClassError(UroeventError):
    """A required class label is absent from the training events."""


class InfeasibleSplitError(UroeventError):
    """No trace assignment keeps every class on both sides of the split."""


class LengthMismatchError(UroeventError):
    """Prediction and truth vectors differ in length."""


class UnknownLabelError(UroeventError):
    """A label outside the declared class set was encountered."""


class DegenerateClassesError(UroeventError):
    """ROC/AUC requires at least one positive and one negative example."""


class TooFewEventsError(UroeventError):
    """Permutation importance needs a minimum number of test events."""


class VersionMismatchError(UroeventError):
    """Model file was written by an incompatible format version."""


class CorruptFileError(UroeventError):
    """Model file failed its checksum or is truncated."""


class ConfigError(UroeventError):
    """Invalid run or generator configuration."""


class MissingArtifactError(UroeventError):
    """A required upstream artifact (model, features, split) does not exist."""
