"""Exception hierarchy for the lab.

Every scenario error the CLI can propagate has a named class here so that
reports and exit messages carry a stable module error name.
"""


class LabError(Exception):
    """Base class for all lab errors."""


class DimensionError(LabError):
    """Shrinker dimensions out of range (need n >= 2, 1 <= k <= n-1)."""


class GridMismatchError(LabError):
    """Two fields do not share a grid."""


class GridTooSmallError(LabError):
    """Grid has too few interior points for the requested stencil."""


class UnsupportedModeError(LabError):
    """Spherical-degree modes (j >= 1) cannot be applied to grid data."""


class QuadratureDomainWarning(UserWarning):
    """Gaussian tail truncated beyond tolerance."""


class NonpositiveRadiusError(LabError):
    """Radius field touched zero: graph over the cylinder broke down."""


class NanDetectedError(LabError):
    """NaN appeared during time stepping."""


class CflViolationError(LabError):
    """Time step exceeds the parabolic CFL bound."""


class PinchDetected(LabError):
    """Min radius crossed the pinch threshold; carries the stopped state."""

    def __init__(self, message, state=None, t=None):
        super().__init__(message)
        self.state = state
        self.t = t


class BoundaryNotGraphicalError(LabError):
    """Boundary gradient too large to extend the graph."""


class CenterOutsideDomainError(LabError):
    """Requested blow-up center lies outside the current grid."""


class BlowupTimeNotSetError(LabError):
    """Type-I ratio requested without an estimated blow-up time."""


class NoPinchObservedError(LabError):
    """Singularity report requested on a run with no pinch event."""


class InsufficientDataError(LabError):
    """Not enough snapshots for a fit."""


class InsufficientSpanError(LabError):
    """Eigenvalue tracking needs a t-span factor >= 4."""


class DomainTooSmallError(LabError):
    """Operation requires a larger ball than the grid provides."""


class PivotTooSmallError(LabError):
    """Neutral-mode pivot too small to solve for an axis translation."""


class RegraphFailureError(LabError):
    """Transformed surface could not be re-graphed over the cylinder."""


class WindowTooShortError(LabError):
    """Classification window does not span a factor of 4 in time."""


class ProfileDomainError(LabError):
    """Square-root argument of the pinch profile is nonpositive."""


class FiniteTimeBlowupError(LabError):
    """Riccati solution hits its pole inside the integration window."""


class ConstraintUnsatisfiableError(LabError):
    """Window constraints of the linear smoothing estimate cannot be met."""


class NotMeanConvexError(LabError):
    """Arrival time requested for a non mean-convex run."""


class NotAThinTorusError(LabError):
    """Squeeze perturbation needs a tube with a/R < 0.2."""


class SelfIntersectionError(LabError):
    """Profile curve stopped being simple."""


class AxisCollisionError(LabError):
    """Profile curve touched the rotation axis."""


class ClassificationInconclusiveError(LabError):
    """Normal-form verdict fell in the inconclusive band."""


class ZeroInputError(LabError):
    """Operation received an identically zero field."""


class ConfigError(LabError):
    """Experiment configuration could not be parsed or validated."""

    def __init__(self, message, line=None, field=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
        self.field = field
