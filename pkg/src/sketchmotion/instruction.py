"""Cross-modal instruction data model and file formats.

An instruction is free-form strokes plus text labels over a named scene
image; a scene bundle is the pair of calibrated views the planner lifts
into. Both have documented JSON formats with strict round-trip identity.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ParseError, ValidationError
from .geometry import CameraView, baseline_angle_deg

SCHEMA_VERSION = "crossinstruct/1"
STROKE_KINDS = ("freehand", "arrow", "boundary")
DEFAULT_MIN_BASELINE_DEG = 10.0


@dataclass(frozen=True)
class StrokeStyle:
    """Rendering style: RGBA color (0..255 each) and stroke width in pixels."""

    rgba: tuple = (255, 0, 0, 255)
    width: float = 2.0

    def __post_init__(self):
        rgba = tuple(int(c) for c in self.rgba)
        if len(rgba) != 4 or any(c < 0 or c > 255 for c in rgba):
            raise ValidationError("style rgba must be four ints in 0..255", field="style.rgba")
        if not (float(self.width) > 0):
            raise ValidationError("style width must be positive", field="style.width")
        object.__setattr__(self, "rgba", rgba)
        object.__setattr__(self, "width", float(self.width))


@dataclass(frozen=True)
class Stroke:
    """One sketched annotation: a polyline with a kind and a style.

    Kinds: freehand (open polyline), arrow (open polyline whose last
    segment carries a head), boundary (polyline rendered closed).
    """

    kind: str
    points: tuple
    style: StrokeStyle = field(default_factory=StrokeStyle)

    def __post_init__(self):
        if self.kind not in STROKE_KINDS:
            raise ValidationError(f"unknown stroke kind {self.kind!r}", field="stroke.kind")
        pts = tuple((float(u), float(v)) for u, v in self.points)
        if len(pts) < 2:
            raise ValidationError("stroke needs at least 2 points", field="stroke.points")
        for u, v in pts:
            if not (np.isfinite(u) and np.isfinite(v)):
                raise ValidationError("stroke point not finite", field="stroke.points")
            if u < 0 or v < 0:
                raise ValidationError("stroke point out of bounds", field="stroke.points")
        object.__setattr__(self, "points", pts)

    @property
    def points_array(self):
        return np.asarray(self.points, dtype=float)


@dataclass(frozen=True)
class TextLabel:
    """Free-form text anchored at a pixel (anchor = top-left of the text box)."""

    text: str
    anchor: tuple

    def __post_init__(self):
        if not self.text:
            raise ValidationError("label text must be nonempty", field="label.text")
        u, v = (float(self.anchor[0]), float(self.anchor[1]))
        if not (np.isfinite(u) and np.isfinite(v)):
            raise ValidationError("anchor not finite", field="label.anchor")
        if u < 0 or v < 0:
            raise ValidationError("anchor out of bounds", field="label.anchor")
        object.__setattr__(self, "anchor", (u, v))


@dataclass(frozen=True)
class CrossModalInstruction:
    """Strokes and labels over the image named by `image_ref`.

    At least one annotation must be present. Coordinates are validated
    non-negative here; the upper bound is checked wherever the referenced
    image (and hence its size) is actually in hand, e.g. rasterization.
    """

    image_ref: str
    strokes: tuple = ()
    labels: tuple = ()

    def __post_init__(self):
        if not self.image_ref:
            raise ValidationError("image_ref must be nonempty", field="image_ref")
        strokes = tuple(self.strokes)
        labels = tuple(self.labels)
        if not strokes and not labels:
            raise ValidationError("no annotations: need at least one stroke or label")
        object.__setattr__(self, "strokes", strokes)
        object.__setattr__(self, "labels", labels)

    def check_bounds(self, width, height):
        """Raise unless every stroke point and anchor lies inside width x height."""
        for i, stroke in enumerate(self.strokes):
            for u, v in stroke.points:
                if u >= width or v >= height:
                    raise ValidationError(
                        f"stroke {i} point ({u:g}, {v:g}) outside {width}x{height} image",
                        field="stroke.points",
                    )
        for i, label in enumerate(self.labels):
            u, v = label.anchor
            if u >= width or v >= height:
                raise ValidationError(
                    f"label {i} anchor ({u:g}, {v:g}) outside {width}x{height} image",
                    field="label.anchor",
                )


def instruction_to_dict(instr: CrossModalInstruction) -> dict:
    return {
        "version": SCHEMA_VERSION,
        "image_ref": instr.image_ref,
        "strokes": [
            {
                "kind": s.kind,
                "points": [[u, v] for u, v in s.points],
                "style": {"rgba": list(s.style.rgba), "width": s.style.width},
            }
            for s in instr.strokes
        ],
        "labels": [{"text": l.text, "anchor": [l.anchor[0], l.anchor[1]]} for l in instr.labels],
    }


def _instruction_from_dict(doc: dict) -> CrossModalInstruction:
    if not isinstance(doc, dict):
        raise ParseError("instruction document must be a JSON object")
    version = doc.get("version")
    if version != SCHEMA_VERSION:
        raise ValidationError(f"unsupported schema version {version!r}", field="version")
    if "image_ref" not in doc:
        raise ValidationError("missing image_ref", field="image_ref")
    strokes = []
    for i, s in enumerate(doc.get("strokes", [])):
        style = s.get("style", {})
        strokes.append(
            Stroke(
                kind=s.get("kind", ""),
                points=s.get("points", []),
                style=StrokeStyle(
                    rgba=tuple(style.get("rgba", (255, 0, 0, 255))),
                    width=style.get("width", 2.0),
                ),
            )
        )
    labels = []
    for l in doc.get("labels", []):
        if "text" not in l or "anchor" not in l:
            raise ValidationError("label needs text and anchor", field="labels")
        labels.append(TextLabel(text=l["text"], anchor=tuple(l["anchor"])))
    return CrossModalInstruction(
        image_ref=str(doc["image_ref"]), strokes=tuple(strokes), labels=tuple(labels)
    )


def parse_instruction(data) -> CrossModalInstruction:
    """Parse and validate one instruction document (bytes, str, or dict)."""
    if isinstance(data, (bytes, str)):
        try:
            data = json.loads(data)
        except json.JSONDecodeError as e:
            raise ParseError(f"instruction JSON malformed: {e.msg}", offset=e.pos) from e
    return _instruction_from_dict(data)


def parse_instruction_list(data) -> list:
    """Parse a document holding either one instruction or a list of them.

    The pipeline consumes a single instruction; files may still carry
    several examples.
    """
    if isinstance(data, (bytes, str)):
        try:
            data = json.loads(data)
        except json.JSONDecodeError as e:
            raise ParseError(f"instruction JSON malformed: {e.msg}", offset=e.pos) from e
    if isinstance(data, list):
        return [_instruction_from_dict(d) for d in data]
    return [_instruction_from_dict(data)]


def serialize_instruction(instr: CrossModalInstruction) -> bytes:
    """Serialize to the documented JSON format; parse round-trips exactly."""
    return json.dumps(instruction_to_dict(instr), indent=2, ensure_ascii=False).encode("utf-8")


@dataclass(frozen=True)
class SceneBundle:
    """The two calibrated views (with image references) a plan lifts into."""

    views: tuple
    image_paths: tuple
    min_baseline_deg: float = DEFAULT_MIN_BASELINE_DEG

    def __post_init__(self):
        object.__setattr__(self, "views", tuple(self.views))
        object.__setattr__(self, "image_paths", tuple(str(p) for p in self.image_paths))
        if len(self.views) != len(self.image_paths):
            raise ValidationError("one image path per view", field="views")

    def view_by_id(self, view_id):
        for v in self.views:
            if v.id == view_id:
                return v
        raise ValidationError(f"no view with id {view_id!r}", field="views")


def validate_scene_bundle(bundle: SceneBundle) -> list:
    """Return one diagnostic string per violated bundle invariant.

    Empty list means the bundle is usable for lifting. Diagnostics, not
    exceptions: callers decide severity.
    """
    diags = []
    if len(bundle.views) != 2:
        diags.append(f"expected exactly 2 views, got {len(bundle.views)}")
        return diags
    v1, v2 = bundle.views
    if v1.id == v2.id:
        diags.append(f"duplicate id {v1.id!r}")
    angle = baseline_angle_deg(v1, v2)
    if angle < bundle.min_baseline_deg:
        diags.append(
            f"baseline angle {angle:.1f}° < {bundle.min_baseline_deg:.1f}°"
        )
    return diags


def parse_scene_bundle(data) -> SceneBundle:
    """Parse the scene-bundle JSON: {views: [{id, image_path, calibration}]}."""
    if isinstance(data, (bytes, str)):
        try:
            data = json.loads(data)
        except json.JSONDecodeError as e:
            raise ParseError(f"scene bundle JSON malformed: {e.msg}", offset=e.pos) from e
    if not isinstance(data, dict) or "views" not in data:
        raise ParseError("scene bundle document must be an object with a 'views' list")
    views = []
    paths = []
    for entry in data["views"]:
        if "calibration" not in entry or "image_path" not in entry:
            raise ParseError("scene view needs image_path and calibration")
        calib = dict(entry["calibration"])
        calib.setdefault("id", entry.get("id"))
        if entry.get("id") is not None and str(calib["id"]) != str(entry["id"]):
            raise ValidationError("view id and calibration id disagree", field="views.id")
        views.append(CameraView.from_dict(calib))
        paths.append(entry["image_path"])
    kwargs = {}
    if "min_baseline_deg" in data:
        kwargs["min_baseline_deg"] = float(data["min_baseline_deg"])
    return SceneBundle(views=tuple(views), image_paths=tuple(paths), **kwargs)


def dump_scene_bundle(bundle: SceneBundle) -> bytes:
    doc = {
        "views": [
            {"id": v.id, "image_path": p, "calibration": v.to_dict()}
            for v, p in zip(bundle.views, bundle.image_paths)
        ],
        "min_baseline_deg": bundle.min_baseline_deg,
    }
    return json.dumps(doc, indent=2).encode("utf-8")
