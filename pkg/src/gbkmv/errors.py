"""Exception hierarchy shared across the package."""


class GbkmvError(Exception):
    """Base class for all errors raised by this package."""


class EmptyDatasetError(GbkmvError, ValueError):
    pass


class InvalidParameterError(GbkmvError, ValueError):
    pass


class DegenerateFitError(GbkmvError, ValueError):
    """All observed values are identical, so no exponent can be fitted."""


class MissingFixtureError(GbkmvError, KeyError):
    pass


class HashCollisionError(GbkmvError):
    pass


class InsufficientSketchError(GbkmvError, ValueError):
    """Too few sketch entries for the requested estimator."""


class DomainError(GbkmvError, ValueError):
    pass


class IncompatibleSketchError(GbkmvError, ValueError):
    pass


class BudgetExhaustedError(GbkmvError, ValueError):
    pass


class InfeasibleBufferError(GbkmvError, ValueError):
    pass


class DegenerateSimilarityError(GbkmvError, ValueError):
    """Raised at s in {0, 1}; ``value`` holds the limit obtained by continuity."""

    def __init__(self, message: str, value: float = 0.0) -> None:
        super().__init__(message)
        self.value = value


class IndexFormatError(GbkmvError):
    pass


class CorruptIndexError(IndexFormatError):
    pass
