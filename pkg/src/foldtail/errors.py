"""Exception hierarchy shared by all foldtail modules."""


class FoldTailError(Exception):
    """Base class for every error raised by this package."""


# potentials
class DegenerateLeadingCoefficient(FoldTailError, ValueError):
    pass


class NoTransitionInRange(FoldTailError, ValueError):
    pass


class NoBranchOnSide(FoldTailError, ValueError):
    pass


# jumpmap
class BelowThreshold(FoldTailError, ValueError):
    pass


class NotInvertible(FoldTailError, ValueError):
    pass


class NoHeavyTailRegime(FoldTailError, ValueError):
    pass


# sampling
class OutOfRange(FoldTailError, ValueError):
    pass


class NoThresholdMass(FoldTailError, ValueError):
    pass


# evt
class EmptySample(FoldTailError, ValueError):
    pass


class TooFewExceedances(FoldTailError, ValueError):
    pass


class DegenerateExcesses(FoldTailError, ValueError):
    pass


class PwmDegenerate(FoldTailError, ValueError):
    pass


class InsufficientPositiveValues(FoldTailError, ValueError):
    pass


class DegenerateHill(FoldTailError, ZeroDivisionError):
    """All upper order statistics used by the Hill estimator are equal."""


# verify
class InvalidGrid(FoldTailError, ValueError):
    pass


# cli
class ConfigParseError(FoldTailError, ValueError):
    pass


class ConfigValidationError(FoldTailError, ValueError):
    """Carries every validation failure found in a config, not just the first."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


class ArtifactIOError(FoldTailError, OSError):
    pass
