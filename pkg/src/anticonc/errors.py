"""Exception types raised across the package."""


class AntiConcError(ValueError):
    pass


# field_model
class DimensionMismatch(AntiConcError):
    pass


class NotSymmetric(AntiConcError):
    pass


class NotPSD(AntiConcError):
    def __init__(self, message, most_negative_pivot=None):
        super().__init__(message)
        self.most_negative_pivot = most_negative_pivot


class RhoOutOfRange(AntiConcError):
    pass


class AllDegenerate(AntiConcError):
    """Every coordinate is constant, so the maximum is a point mass (Q == 1)."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


# rng_sampler
class KOutOfRange(AntiConcError):
    pass


# gaussian_num
class QuantileDomain(AntiConcError):
    pass


class ZeroVarianceCoordinate(AntiConcError):
    pass


class BoxEmpty(AntiConcError):
    pass


# order_density
class CombinatorialBudgetExceeded(AntiConcError):
    pass


class DegenerateSpec(AntiConcError):
    pass


class PeakAtBoundary(AntiConcError):
    pass


class EmptyPositiveRegion(AntiConcError):
    pass


# concentration
class TooFewSamples(AntiConcError):
    pass


# bounds
class UnsortedInput(AntiConcError):
    pass


class NonpositiveSd(AntiConcError):
    pass


class BadRho(AntiConcError):
    pass


class RhoCoverAtOne(AntiConcError):
    pass


class SOutOfRange(AntiConcError):
    pass


# harness
class ConfigError(AntiConcError):
    pass
