"""Exception hierarchy shared across the package."""


class CapslamError(Exception):
    """Base class for all package-specific failures."""


class DegenerateRotationError(CapslamError):
    """Rotation angle too close to pi for a stable logarithm."""


class InvalidDepthError(CapslamError):
    """Non-positive depth where a metric depth is required."""


class BehindCameraError(CapslamError):
    """Point with non-positive z handed to the projection."""


class DimensionMismatchError(CapslamError):
    """Arrays that must share a shape do not."""


class InsufficientOverlapError(CapslamError):
    """Too few geometric associations to form a tracking system."""


class InsufficientTextureError(CapslamError):
    """Too few valid pixels to form a photometric system."""


class GraphTooSmallError(CapslamError):
    """Deformation graph has fewer nodes than required neighbors."""


class SingularityError(CapslamError):
    """Field evaluation requested at the source point itself."""


class WorkspaceError(CapslamError):
    """Capsule pose outside the magnetic workspace."""


class UnsupportedLayoutError(CapslamError):
    """Sensor array is not the regular grid an operation requires."""


class InsufficientDataError(CapslamError):
    """Too few samples or pose pairs for the requested computation."""


class DegenerateMotionError(CapslamError):
    """Calibration motions do not span enough rotation axes."""


class InvalidViewError(CapslamError):
    """Render requested from a pose outside the cavity."""


class DatasetError(CapslamError):
    """Dataset directory is missing files or fails manifest validation."""


class FilterDegenerateError(CapslamError):
    """All particle weights collapsed to zero."""
