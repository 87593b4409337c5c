"""Exception hierarchy shared across the package.

Every error class maps to one CLI exit code (see cli.EXIT_CODES) and one
HTTP status (see service.app), so errors raised deep in the pipeline stay
machine-distinguishable at the surface.
"""


class SketchMotionError(Exception):
    """Base class for all package errors."""


class ValidationError(SketchMotionError):
    """Input violates a documented invariant. `field` names the offender."""

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class ParseError(SketchMotionError):
    """Malformed document. `offset` is the byte offset when known."""

    def __init__(self, message, offset=None):
        super().__init__(message)
        self.offset = offset


class InvalidInputError(SketchMotionError):
    """Non-finite or otherwise unusable numeric input."""


class BehindCameraError(SketchMotionError):
    """Point has non-positive depth in the camera frame."""


class DegenerateGeometryError(SketchMotionError):
    """Geometric configuration admits no unique answer (e.g. parallel rays)."""


class EmptyRegionError(SketchMotionError):
    """Cross-view intersection produced no samples. `timestep` when known."""

    def __init__(self, message, timestep=None):
        super().__init__(message)
        self.timestep = timestep


class SingularCovarianceError(SketchMotionError):
    """Covariance is singular where a density value is required."""


class TransportError(SketchMotionError):
    """Live backend unreachable after retries. Carries retry metadata."""

    def __init__(self, message, attempts=0, url=None):
        super().__init__(message)
        self.attempts = attempts
        self.url = url


class ScenarioIncompleteError(SketchMotionError):
    """Scripted scenario has no entry for a request. Names the divergence."""

    def __init__(self, message, kind=None, digest=None):
        super().__init__(message)
        self.kind = kind
        self.digest = digest


class InvalidResponseError(SketchMotionError):
    """Backend response fails a response validator."""


class InsufficientKeypointsError(SketchMotionError):
    """Fewer descriptors survived pointing than the configured minimum."""


class PipelineStageError(SketchMotionError):
    """Wraps a module error with the pipeline stage it occurred in."""

    def __init__(self, stage, cause):
        super().__init__(f"stage {stage!r}: {cause}")
        self.stage = stage
        self.cause = cause


class TrainingDivergedError(SketchMotionError):
    """A network parameter became non-finite. `step` is the gradient step."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


def error_to_dict(exc: SketchMotionError) -> dict:
    """Wire shape shared by CLI --json output and HTTP error bodies."""
    body = {"type": type(exc).__name__, "message": str(exc)}
    for attr in ("field", "offset", "stage", "kind", "digest", "timestep", "attempts", "url", "step"):
        value = getattr(exc, attr, None)
        if value is not None:
            body[attr] = value
    if isinstance(exc, PipelineStageError) and isinstance(exc.cause, SketchMotionError):
        body["cause"] = error_to_dict(exc.cause)
    return body
