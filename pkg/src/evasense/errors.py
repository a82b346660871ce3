"""Exception and warning types raised across the toolkit."""


class EvaSenseError(Exception):
    """Base class for all toolkit-specific errors."""


class ZeroRange(EvaSenseError):
    """A candidate or target position coincides with an AP position."""


class InvalidAngle(EvaSenseError):
    """A virtual angle fell outside [-1, 1] beyond numerical tolerance."""


class NonPositiveInput(EvaSenseError):
    """A quantity that must be strictly positive (range, RCS, frequency) was not."""


class InsufficientPeaks(EvaSenseError):
    """The coarse spectrum did not contain enough separable peaks, or the
    requested model order leaves no noise subspace."""


class LengthMismatch(EvaSenseError):
    """Estimate and truth lists disagree in length."""


class SingularGeometry(EvaSenseError):
    """The accumulated position information matrix is singular; the
    AP/target geometry does not constrain both coordinates."""


class PlacementFailure(EvaSenseError):
    """Random target placement could not satisfy the separation
    constraint within the attempt budget."""


class ScenarioFormatError(EvaSenseError):
    """A scenario file is missing keys or holds out-of-domain values."""


class RankDeficientWarning(UserWarning):
    """Sample covariance showed no usable gap between signal and noise
    eigenvalues; subspace estimates may be unreliable."""
