"""Exception taxonomy shared by the whole package.

Every error that can cross the CLI or HTTP boundary carries a stable
``error_code`` string so callers can switch on it without parsing messages.
"""


class LimevisError(Exception):
    """Base class for all errors raised by this package."""

    error_code = "error"


class UnsupportedFormat(LimevisError):
    error_code = "unsupported_format"


class TruncatedData(LimevisError):
    error_code = "truncated_data"


class MalformedFile(LimevisError):
    error_code = "malformed_file"


class IndexOutOfRange(LimevisError):
    error_code = "index_out_of_range"


class InvalidParams(LimevisError):
    error_code = "invalid_params"


class DimensionMismatch(LimevisError):
    error_code = "dimension_mismatch"


class SingularSystem(LimevisError):
    error_code = "singular_system"


class ExternalPredictorFailure(LimevisError):
    error_code = "external_predictor_failure"


class EmptyDataset(LimevisError):
    error_code = "empty_dataset"


class EmptyCategory(LimevisError):
    error_code = "empty_category"


class LabelImageCountMismatch(LimevisError):
    error_code = "label_image_count_mismatch"


class TooFewPoints(LimevisError):
    error_code = "too_few_points"


class UnknownImage(LimevisError):
    error_code = "unknown_image"


class SuperpixelOutOfRange(LimevisError):
    error_code = "superpixel_out_of_range"


class OutOfBounds(LimevisError):
    error_code = "out_of_bounds"
