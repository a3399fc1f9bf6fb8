"""Exception hierarchy.

The CLI maps these onto its exit codes: ``SchemaError`` -> 3, every other
``RadonlikeError`` -> 4.
"""


class RadonlikeError(Exception):
    """Base class for all library errors."""


class SchemaError(RadonlikeError):
    """An input document does not match its published schema."""

    def __init__(self, message, path=()):
        self.path = tuple(path)
        where = "/".join(str(p) for p in self.path)
        super().__init__(f"{message} (at /{where})" if self.path else message)


class DomainError(RadonlikeError, ValueError):
    """A mathematical precondition of an operation is violated."""


class DimensionError(DomainError):
    """Array or vector dimensions are inconsistent."""


class InfeasibleError(DomainError):
    """More matrices were requested than the Hurwitz-Radon bound allows."""

    def __init__(self, n, requested, bound):
        self.n, self.requested, self.bound = n, requested, bound
        super().__init__(
            f"cannot build {requested} matrices of size {n}: "
            f"the Hurwitz-Radon bound is {bound}"
        )


class FitError(DomainError):
    """Too few usable points to fit a sublevel exponent."""


class HypothesisError(DomainError):
    """A function violates the hypothesis of the inequality being checked."""


class ResolutionError(DomainError):
    """A grid is too coarse (or too small) for the requested sets."""
