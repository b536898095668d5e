"""Exception types raised across the toolkit."""


class MarinesegError(Exception):
    """Base class for all toolkit errors."""


class MissingBandError(MarinesegError):
    """Patch raster does not carry exactly the expected number of bands."""


class ShapeMismatchError(MarinesegError):
    """Paired arrays (image/labels/prediction) disagree spatially."""


class UnknownClassError(MarinesegError):
    """A label name falls outside the class scheme's grouping."""


class EmptyDatasetError(MarinesegError):
    """No labeled pixel exists in the given collection."""


class InfeasibleSplitError(MarinesegError):
    """No image-level split satisfied the per-class fraction constraint."""

    def __init__(self, msg, nearest_fractions=None):
        super().__init__(msg)
        self.nearest_fractions = nearest_fractions or {}


class NoLabeledPixelError(MarinesegError):
    """A batch handed to the supervised loss contains zero labeled pixels."""


class EmptyMatrixError(MarinesegError):
    """Confusion matrix holds no counts."""


class AllUndefinedError(MarinesegError):
    """Every per-class IoU is undefined (0/0)."""


class DegenerateInputError(MarinesegError):
    """Input too small for the requested statistic."""


class ShapeError(MarinesegError):
    """Model input spatial size incompatible with the pooling depth."""


class ConfigError(MarinesegError):
    """Configuration inconsistent with the requested operation."""


class NoCheckpointError(MarinesegError):
    """Evaluation requested but no checkpoint has been written."""
