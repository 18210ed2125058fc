"""Exception types raised across the package."""


class PenFBMError(Exception):
    """Base class for all package errors."""


class FactorizationFailure(PenFBMError):
    """Covariance matrix is not positive definite even after jitter."""


class NegativeEigenvalue(PenFBMError):
    """Circulant embedding produced a genuinely negative eigenvalue."""


class DegenerateWeights(PenFBMError):
    """Effective sample size of a weighted ensemble fell below the floor."""

    def __init__(self, ess, floor):
        super().__init__(f"effective sample size {ess:.1f} below floor {floor:.1f}")
        self.ess = ess
        self.floor = floor


class BudgetExhausted(PenFBMError):
    """A rejection sampler ran out of draws before reaching its target."""


class EmptySample(PenFBMError):
    pass


class NonfiniteWeight(PenFBMError):
    pass


class ConfigInvalid(PenFBMError):
    """Invalid experiment configuration; ``field`` names the offending key."""

    def __init__(self, message, field=None):
        super().__init__(f"{field}: {message}" if field else message)
        self.field = field
