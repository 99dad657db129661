"""Exception hierarchy shared by all modules."""


class ManifoldError(Exception):
    """Base class for every error raised by tbmanifold."""


class RangeError(ManifoldError, ValueError):
    """A latent parameter fell outside the generator's parameter range."""


class DimensionError(ManifoldError, ValueError):
    """Array dimensions do not match what the operation expects."""


class SizeError(ManifoldError, ValueError):
    """Too few points for the requested model."""


class ParseError(ManifoldError, ValueError):
    """A point file could not be parsed."""


class NumericFailure(ManifoldError, ArithmeticError):
    """EM produced a non-finite log-likelihood."""

    def __init__(self, message, iteration=None):
        super().__init__(message)
        self.iteration = iteration


class DegenerateFrame(ManifoldError):
    """A mixture component does not span a d-dimensional subspace."""

    def __init__(self, message, component=None):
        super().__init__(message)
        self.component = component


class EmptyEstimate(ManifoldError):
    """Every neighborhood of a manifold estimate is empty."""


class PathologicalThreshold(ManifoldError):
    """Rejection sampling acceptance is too low to be usable."""


class UnsupportedDimension(ManifoldError, ValueError):
    """Operation is not available for this intrinsic dimension."""


class TuningFailure(ManifoldError):
    """No hyperparameter candidate produced a usable estimate."""
