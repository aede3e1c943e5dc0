"""Exception hierarchy shared across the package.

Every domain failure raises a subclass of :class:`NecError`, so the CLI can
map any library error to exit code 1 while argparse keeps code 2 for usage
problems.
"""


class NecError(Exception):
    """Base class for all domain errors."""


class BoundaryGapError(NecError):
    """A gap sits too close to the series boundary to gather anchor points."""


class UnfillableGapError(NecError):
    """A gap exceeds the configured maximum fillable length."""


class DegenerateSeriesError(NecError):
    """The series has zero variance after differencing."""


class InvalidInputError(NecError):
    """Non-finite or otherwise malformed numeric input."""


class FitFailureError(NecError):
    """A distribution fit could not produce valid parameters."""


class SplitInfeasibleError(NecError):
    """Holdout ranges cannot host the requested number of sections."""


class StratificationInfeasibleError(NecError):
    """Oversampling requested but no extreme-containing window exists."""


class DimensionError(NecError):
    """Array shapes inconsistent with the model or window configuration."""


class ConfigError(NecError):
    """Invalid configuration value or unknown configuration key."""


class NumericInstabilityError(NecError):
    """Non-finite values encountered during forward/backward computation."""


class TrainingFailureError(NecError):
    """Training diverged (non-finite validation loss)."""


class AlignmentError(NecError):
    """Feature channels are not aligned on the same timestamps."""


class ZeroDenominatorError(NecError):
    """A metric denominator is zero (e.g. MAPE with zero ground truth)."""


class UndefinedTestError(NecError):
    """A statistical test is undefined for the given data."""


class CheckpointError(NecError):
    """A run artifact is missing, corrupt, or from an incompatible version."""
