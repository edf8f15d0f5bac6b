"""Exception types raised by the segmentation engine."""


class NcCutError(Exception):
    """Base class for all engine errors."""


class DecodeError(NcCutError):
    """Image bytes could not be decoded."""


class InvalidInputError(NcCutError, ValueError):
    """An argument violates an operation precondition."""


class InvalidRoiError(InvalidInputError):
    """ROI polygon is degenerate or selects no/all pixels."""


class InvalidLabelingError(InvalidInputError):
    """A pixel labeling is unusable (e.g. one side empty)."""


class InvalidPathError(InvalidInputError):
    """A region path contains a non-adjacent consecutive pair."""


class NumericalError(NcCutError):
    """A numerical result is NaN or otherwise unusable."""
