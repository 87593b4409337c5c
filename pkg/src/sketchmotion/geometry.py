"""Calibrated pinhole-camera geometry.

Conventions (fixed for the whole package):
  - Camera frame is x-right, y-down, z-forward; pixel v grows downward.
  - `CameraPose.rotation` maps camera-frame vectors into the world frame
    (world-from-camera); `translation` is the camera origin in world
    coordinates, meters.
  - K is the standard upper-triangular intrinsic matrix with zero skew.

Pixel (u, v) back-projects to the ray  origin + normalize(R @ K^-1 @ [u, v, 1]) * d.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BehindCameraError,
    DegenerateGeometryError,
    InvalidInputError,
    ParseError,
    ValidationError,
)

ORTHONORMAL_TOL = 1e-9
UNIT_NORM_TOL = 1e-9
PARALLEL_TOL = 1e-9


def _as_vector(x, n, name):
    v = np.asarray(x, dtype=float).reshape(-1)
    if v.shape != (n,):
        raise ValidationError(f"{name} must be a {n}-vector, got shape {v.shape}", field=name)
    return v


def _freeze(a):
    a = np.ascontiguousarray(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole intrinsics in pixels: focal lengths, principal point, image size."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValidationError("focal lengths must be positive", field="fx/fy")
        if not (0 <= self.cx < self.width):
            raise ValidationError("cx must lie in [0, width)", field="cx")
        if not (0 <= self.cy < self.height):
            raise ValidationError("cy must lie in [0, height)", field="cy")

    @property
    def matrix(self):
        return np.array([[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]])

    def to_dict(self):
        return {
            "fx": self.fx,
            "fy": self.fy,
            "cx": self.cx,
            "cy": self.cy,
            "width": self.width,
            "height": self.height,
        }

    @classmethod
    def from_dict(cls, d):
        try:
            return cls(
                fx=float(d["fx"]),
                fy=float(d["fy"]),
                cx=float(d["cx"]),
                cy=float(d["cy"]),
                width=int(d["width"]),
                height=int(d["height"]),
            )
        except KeyError as e:
            raise ParseError(f"intrinsics missing field {e.args[0]!r}") from e


@dataclass(frozen=True)
class CameraPose:
    """World-from-camera rotation plus camera origin in world coordinates."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        R = np.asarray(self.rotation, dtype=float)
        if R.shape != (3, 3):
            raise ValidationError("rotation must be 3x3", field="rotation")
        if np.abs(R.T @ R - np.eye(3)).max() > ORTHONORMAL_TOL:
            raise ValidationError("rotation is not orthonormal within 1e-9", field="rotation")
        if np.linalg.det(R) < 0:
            raise ValidationError("rotation determinant must be +1", field="rotation")
        t = _as_vector(self.translation, 3, "translation")
        object.__setattr__(self, "rotation", _freeze(R))
        object.__setattr__(self, "translation", _freeze(t))

    def __eq__(self, other):
        if not isinstance(other, CameraPose):
            return NotImplemented
        return np.array_equal(self.rotation, other.rotation) and np.array_equal(
            self.translation, other.translation
        )

    def __hash__(self):
        return hash((self.rotation.tobytes(), self.translation.tobytes()))

    def to_dict(self):
        return {
            "rotation": [float(x) for x in self.rotation.reshape(-1)],
            "translation": [float(x) for x in self.translation],
        }

    @classmethod
    def from_dict(cls, d):
        try:
            rot = np.asarray(d["rotation"], dtype=float)
        except KeyError as e:
            raise ParseError("pose missing field 'rotation'") from e
        if rot.size != 9:
            raise ParseError("pose rotation must hold 9 numbers (row-major)")
        try:
            trans = d["translation"]
        except KeyError as e:
            raise ParseError("pose missing field 'translation'") from e
        return cls(rotation=rot.reshape(3, 3), translation=np.asarray(trans, dtype=float))


@dataclass(frozen=True)
class CameraView:
    """One calibrated view: identifier, intrinsics, and world pose."""

    id: str
    intrinsics: CameraIntrinsics
    pose: CameraPose

    def to_dict(self):
        return {"id": self.id, "intrinsics": self.intrinsics.to_dict(), "pose": self.pose.to_dict()}

    @classmethod
    def from_dict(cls, d):
        for key in ("id", "intrinsics", "pose"):
            if key not in d:
                raise ParseError(f"view missing field {key!r}")
        return cls(
            id=str(d["id"]),
            intrinsics=CameraIntrinsics.from_dict(d["intrinsics"]),
            pose=CameraPose.from_dict(d["pose"]),
        )


@dataclass(frozen=True)
class Ray:
    """Half-line origin + direction * d, direction unit-norm within 1e-9."""

    origin: np.ndarray
    direction: np.ndarray

    def __post_init__(self):
        o = _as_vector(self.origin, 3, "origin")
        d = _as_vector(self.direction, 3, "direction")
        if abs(np.linalg.norm(d) - 1.0) > UNIT_NORM_TOL:
            raise ValidationError("ray direction must be unit norm within 1e-9", field="direction")
        object.__setattr__(self, "origin", _freeze(o))
        object.__setattr__(self, "direction", _freeze(d))


def pixel_to_ray(view: CameraView, pixel) -> Ray:
    """Back-project a pixel to a world-frame ray through the camera origin.

    Out-of-bounds pixels are permitted (density sampling walks off the
    image); non-finite coordinates are rejected.
    """
    p = np.asarray(pixel, dtype=float).reshape(-1)
    if p.shape != (2,):
        raise InvalidInputError(f"pixel must be a 2-vector, got shape {p.shape}")
    if not np.all(np.isfinite(p)):
        raise InvalidInputError("pixel coordinates must be finite")
    intr = view.intrinsics
    cam_dir = np.array([(p[0] - intr.cx) / intr.fx, (p[1] - intr.cy) / intr.fy, 1.0])
    world_dir = view.pose.rotation @ cam_dir
    world_dir = world_dir / np.linalg.norm(world_dir)
    return Ray(origin=view.pose.translation, direction=world_dir)


def pixel_grid_to_rays(view: CameraView, pixels: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized pixel_to_ray: (N, 2) pixels -> (origin, (N, 3) unit directions)."""
    p = np.asarray(pixels, dtype=float)
    if p.ndim != 2 or p.shape[1] != 2:
        raise InvalidInputError(f"pixels must be (N, 2), got shape {p.shape}")
    if not np.all(np.isfinite(p)):
        raise InvalidInputError("pixel coordinates must be finite")
    intr = view.intrinsics
    cam = np.empty((p.shape[0], 3))
    cam[:, 0] = (p[:, 0] - intr.cx) / intr.fx
    cam[:, 1] = (p[:, 1] - intr.cy) / intr.fy
    cam[:, 2] = 1.0
    world = cam @ view.pose.rotation.T
    world /= np.linalg.norm(world, axis=1, keepdims=True)
    return view.pose.translation, world


def ray_point(ray: Ray, d: float) -> np.ndarray:
    """Evaluate the ray at depth d (meters along the unit direction)."""
    if not np.isfinite(d):
        raise InvalidInputError("depth must be finite")
    return ray.origin + d * ray.direction


def project_point(view: CameraView, point) -> np.ndarray:
    """Project a world point to pixel coordinates; raises behind the camera."""
    p = _as_vector(point, 3, "point")
    cam = view.pose.rotation.T @ (p - view.pose.translation)
    if cam[2] <= 0:
        raise BehindCameraError(f"point has non-positive depth {cam[2]:.6g} in view {view.id!r}")
    intr = view.intrinsics
    return np.array([intr.fx * cam[0] / cam[2] + intr.cx, intr.fy * cam[1] / cam[2] + intr.cy])


def project_points(view: CameraView, points: np.ndarray) -> np.ndarray:
    """Vectorized project_point over an (N, 3) array."""
    p = np.asarray(points, dtype=float)
    cam = (p - view.pose.translation) @ view.pose.rotation
    z = cam[:, 2]
    if np.any(z <= 0):
        raise BehindCameraError(f"{int(np.sum(z <= 0))} points behind camera in view {view.id!r}")
    intr = view.intrinsics
    out = np.empty((p.shape[0], 2))
    out[:, 0] = intr.fx * cam[:, 0] / z + intr.cx
    out[:, 1] = intr.fy * cam[:, 1] / z + intr.cy
    return out


def ray_ray_closest_points(r1: Ray, r2: Ray):
    """Closed-form closest points between two rays (as infinite lines).

    Returns (p1, p2, gap) with p1 on r1, p2 on r2 minimizing distance and
    gap = ||p1 - p2||. The midpoint (p1 + p2) / 2 is the two-view
    triangulation oracle. Near-parallel rays are rejected.
    """
    d1, d2 = r1.direction, r2.direction
    b = float(d1 @ d2)
    if abs(b) > 1.0 - PARALLEL_TOL:
        raise DegenerateGeometryError(f"rays are near-parallel (|cos| = {abs(b):.12f})")
    r = r1.origin - r2.origin
    d = float(d1 @ r)
    e = float(d2 @ r)
    den = 1.0 - b * b
    t1 = (b * e - d) / den
    t2 = (e - b * d) / den
    p1 = r1.origin + t1 * d1
    p2 = r2.origin + t2 * d2
    return p1, p2, float(np.linalg.norm(p1 - p2))


def triangulate_midpoint(r1: Ray, r2: Ray) -> np.ndarray:
    """Midpoint of the closest-point pair: the closed-form triangulation."""
    p1, p2, _ = ray_ray_closest_points(r1, r2)
    return 0.5 * (p1 + p2)


def baseline_angle_deg(view1: CameraView, view2: CameraView, at_point=None) -> float:
    """Angle in degrees between the two viewing rays toward `at_point`.

    Defaults to the angle between optical axes when no point is given.
    """
    if at_point is None:
        a1 = view1.pose.rotation @ np.array([0.0, 0.0, 1.0])
        a2 = view2.pose.rotation @ np.array([0.0, 0.0, 1.0])
    else:
        p = _as_vector(at_point, 3, "at_point")
        a1 = p - view1.pose.translation
        a2 = p - view2.pose.translation
        n1, n2 = np.linalg.norm(a1), np.linalg.norm(a2)
        if n1 == 0 or n2 == 0:
            raise DegenerateGeometryError("point coincides with a camera origin")
        a1, a2 = a1 / n1, a2 / n2
    c = float(np.clip(a1 @ a2, -1.0, 1.0))
    return float(np.degrees(np.arccos(c)))


def load_calibration(data) -> list[CameraView]:
    """Parse the calibration JSON format: a list of view dicts.

    Accepts bytes/str (JSON document) or an already-decoded list.
    """
    if isinstance(data, (bytes, str)):
        try:
            data = json.loads(data)
        except json.JSONDecodeError as e:
            raise ParseError(f"calibration JSON malformed: {e.msg}", offset=e.pos) from e
    if not isinstance(data, list):
        raise ParseError("calibration document must be a JSON list of views")
    return [CameraView.from_dict(d) for d in data]


def dump_calibration(views) -> bytes:
    """Serialize views to the calibration JSON format (load round-trips)."""
    return json.dumps([v.to_dict() for v in views], indent=2).encode()
