"""Backend-agnostic request operations for the two model roles.

Every backend implements one method, send(kind, payload) -> response.
The functions here build payloads, dispatch, and validate responses; a
canned response is held to exactly the same rules as a live one.
"""

import logging
from abc import ABC, abstractmethod

import numpy as np

from ..errors import InvalidResponseError, ValidationError
from ..instruction import instruction_to_dict
from .types import KeypointDescriptor, PointedKeypoint, PoseStep, normalize_quaternion

logger = logging.getLogger(__name__)


class ModelBackend(ABC):
    """Transport for model requests; payloads may contain numpy images."""

    @abstractmethod
    def send(self, kind: str, payload: dict) -> dict:
        """Dispatch one request and return the parsed JSON response."""

    def describe(self) -> str:
        return type(self).__name__


def _context_payload(context) -> dict:
    return {
        "instruction": instruction_to_dict(context.instruction),
        "annotated_image": np.asarray(context.annotated_image),
        "view_ids": list(context.view_ids),
        "view_images": [np.asarray(img) for img in context.view_images],
    }


def _pointed_payload(context) -> list:
    ordered = sorted(context.pointed, key=lambda p: (p.descriptor_index, p.view_id))
    return [p.to_dict() for p in ordered]


def request_keypoints(backend: ModelBackend, context) -> list:
    """Ask the reasoning model for the scene's semantic keypoint descriptors."""
    context.validate()
    if context.descriptors:
        raise ValidationError("context already holds descriptors", field="descriptors")
    response = backend.send("keypoints", _context_payload(context))
    raw = response.get("descriptors") if isinstance(response, dict) else None
    if not isinstance(raw, list) or not raw:
        raise InvalidResponseError("keypoints response must hold a nonempty descriptor list")
    out = []
    for i, d in enumerate(raw):
        if not isinstance(d, dict) or not str(d.get("label", "")).strip():
            raise InvalidResponseError(f"descriptor {i} lacks a usable label")
        out.append(KeypointDescriptor.from_dict(d))
    return out


def clamp_pixel(pixel, width: int, height: int, diagnostics=None, label: str = ""):
    """Clamp a pixel into [0, width-1] x [0, height-1], warning when it moves."""
    u, v = float(pixel[0]), float(pixel[1])
    cu = min(max(u, 0.0), float(width - 1))
    cv = min(max(v, 0.0), float(height - 1))
    if (cu, cv) != (u, v):
        msg = f"pixel ({u:g}, {v:g}) outside {width}x{height} image, clamped to ({cu:g}, {cv:g})"
        if label:
            msg = f"{label}: {msg}"
        logger.warning(msg)
        if diagnostics is not None:
            diagnostics.append(msg)
    return (cu, cv)


def point_keypoint(
    backend: ModelBackend,
    descriptor: KeypointDescriptor,
    image,
    view_id: str,
    descriptor_index: int = 0,
    diagnostics=None,
) -> PointedKeypoint:
    """Ground one descriptor to a pixel in one view via the pointing model."""
    img = np.asarray(image)
    if img.ndim != 3 or img.shape[2] != 3 or img.size == 0:
        raise ValidationError("image must be nonempty HxWx3", field="image")
    payload = {"descriptor": descriptor.to_dict(), "view_id": view_id, "image": img}
    response = backend.send("point", payload)
    raw = response.get("pixel") if isinstance(response, dict) else None
    if not isinstance(raw, (list, tuple)) or len(raw) != 2:
        raise InvalidResponseError("pointing response must hold a 2-element pixel")
    try:
        u, v = float(raw[0]), float(raw[1])
    except (TypeError, ValueError):
        raise InvalidResponseError("pointing response pixel is not numeric") from None
    if not (np.isfinite(u) and np.isfinite(v)):
        raise InvalidResponseError("pointing response pixel is not finite")
    height, width = img.shape[0], img.shape[1]
    pixel = clamp_pixel((u, v), width, height, diagnostics, label=f"point {descriptor.label!r}")
    return PointedKeypoint(descriptor_index=descriptor_index, view_id=view_id, pixel=pixel)


def _parse_polyline(raw, index: int) -> np.ndarray:
    if not isinstance(raw, (list, tuple)) or len(raw) < 2:
        raise InvalidResponseError(f"polyline {index} must hold at least 2 points")
    try:
        arr = np.asarray(raw, dtype=float)
    except (TypeError, ValueError):
        raise InvalidResponseError(f"polyline {index} is not numeric") from None
    if arr.ndim != 2 or arr.shape[1] != 2 or not np.all(np.isfinite(arr)):
        raise InvalidResponseError(f"polyline {index} must be finite (N, 2)")
    return arr


def request_pixel_trajectories(backend: ModelBackend, context) -> tuple:
    """Ask the reasoning model to draw the 2D motion over both views.

    Returns the raw polylines in view order; the caller resamples them
    to a common horizon. Closeness to the pointed keypoints is reported
    by diagnostics downstream, not enforced here.
    """
    context.validate()
    if not context.descriptors:
        raise ValidationError("context holds no descriptors yet", field="descriptors")
    if not context.pointed:
        raise ValidationError("context holds no pointed keypoints yet", field="pointed")
    payload = _context_payload(context)
    payload["descriptors"] = [d.to_dict() for d in context.descriptors]
    payload["pointed"] = _pointed_payload(context)
    response = backend.send("trajectories", payload)
    raw = response.get("polylines") if isinstance(response, dict) else None
    if not isinstance(raw, (list, tuple)) or len(raw) != 2:
        raise InvalidResponseError("trajectories response must hold exactly 2 polylines")
    return _parse_polyline(raw[0], 0), _parse_polyline(raw[1], 1)


def request_pose_schedule(backend: ModelBackend, context) -> list:
    """Ask for orientation and gripper per timestep, given the lifted path."""
    context.validate()
    if context.lifted_trajectory is None:
        raise ValidationError("context lacks the lifted trajectory", field="lifted_trajectory")
    traj = np.asarray(context.lifted_trajectory, dtype=float)
    if traj.ndim != 2 or traj.shape[1] != 3 or traj.shape[0] < 1:
        raise ValidationError("lifted trajectory must be (H, 3)", field="lifted_trajectory")
    horizon = traj.shape[0]
    payload = _context_payload(context)
    payload["descriptors"] = [d.to_dict() for d in context.descriptors]
    payload["pointed"] = _pointed_payload(context)
    payload["trajectory_3d"] = [[float(v) for v in row] for row in traj]
    response = backend.send("poses", payload)
    raw = response.get("steps") if isinstance(response, dict) else None
    if not isinstance(raw, list) or len(raw) != horizon:
        got = len(raw) if isinstance(raw, list) else "none"
        raise InvalidResponseError(f"pose schedule must hold exactly {horizon} steps, got {got}")
    steps = []
    for i, s in enumerate(raw):
        if not isinstance(s, dict):
            raise InvalidResponseError(f"pose step {i} is not an object")
        t = int(s.get("t", i + 1))
        if t != i + 1:
            raise InvalidResponseError(f"pose step {i} carries timestep {t}, expected {i + 1}")
        q = normalize_quaternion(s.get("quaternion", ()))
        if q is None:
            raise InvalidResponseError(f"pose step {i} quaternion is not usable")
        g = s.get("gripper")
        if g not in (0, 1):
            raise InvalidResponseError(f"pose step {i} gripper must be 0 or 1")
        steps.append(PoseStep(t=t, orientation=q, gripper=int(g)))
    return steps
