"""Exception types raised across the simulation and reconstruction pipeline."""


class RadioPlanError(Exception):
    """Base class for every package-specific error."""


class OverlapError(RadioPlanError):
    """Two scatterer boxes intersect."""


class OutOfBoundsError(RadioPlanError):
    """A scatterer or device lies outside the room."""


class EmptySceneError(RadioPlanError):
    """Scene carries no active devices."""


class ResolutionError(RadioPlanError):
    """Requested raster resolution is too coarse."""


class PlacementError(RadioPlanError):
    """Device placement failed: not enough free space within the retry budget."""


class DegenerateGeometryError(RadioPlanError):
    """A propagation path is too short for the point-source element model."""


class ZeroFieldError(RadioPlanError):
    """SNR calibration requires a field that is not identically zero."""


class SpacingMismatchError(RadioPlanError):
    """Matched-filter kernel spacing differs from the signal grid spacing."""


class SingularSystemError(RadioPlanError):
    """Least-squares normal equations could not be solved."""


class ShapeMismatchError(RadioPlanError):
    """Operands have incompatible shapes."""


class TooSmallError(RadioPlanError):
    """Image is smaller than the metric's sliding window."""


class StratumTooSmallError(RadioPlanError):
    """A dataset stratum is too small to split at the requested ratios."""


class ManifestError(RadioPlanError):
    """Manifest file is missing, malformed, or inconsistent with disk state."""
