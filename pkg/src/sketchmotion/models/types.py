"""Domain types for the two model roles and their scripted substitute."""

import copy
import json
from dataclasses import dataclass, field

import numpy as np

from ..errors import ParseError, ScenarioIncompleteError, ValidationError

REQUEST_KINDS = ("keypoints", "point", "trajectories", "poses")

QUAT_EXACT_TOL = 1e-9
QUAT_NORM_TOL = 0.1


@dataclass(frozen=True)
class KeypointDescriptor:
    """A named scene point before pixel grounding: label plus free metadata."""

    label: str
    metadata: str = ""

    def __post_init__(self):
        if not isinstance(self.label, str) or not self.label.strip():
            raise ValidationError("descriptor label must be nonempty", field="label")

    def to_dict(self):
        return {"label": self.label, "metadata": self.metadata}

    @classmethod
    def from_dict(cls, d):
        return cls(label=str(d.get("label", "")), metadata=str(d.get("metadata", "")))


@dataclass(frozen=True)
class PointedKeypoint:
    """A descriptor grounded to one pixel in one view."""

    descriptor_index: int
    view_id: str
    pixel: tuple

    def __post_init__(self):
        if self.descriptor_index < 0:
            raise ValidationError("descriptor_index must be >= 0", field="descriptor_index")
        px = tuple(float(v) for v in self.pixel)
        if len(px) != 2 or not all(np.isfinite(px)):
            raise ValidationError("pixel must be a finite 2-vector", field="pixel")
        object.__setattr__(self, "pixel", px)

    def to_dict(self):
        return {
            "descriptor_index": self.descriptor_index,
            "view_id": self.view_id,
            "pixel": list(self.pixel),
        }


@dataclass(frozen=True)
class PoseStep:
    """Orientation and gripper command for one timestep.

    Gripper 0 is open, 1 is closed.
    """

    t: int
    orientation: tuple
    gripper: int

    def __post_init__(self):
        q = tuple(float(v) for v in self.orientation)
        if len(q) != 4 or not all(np.isfinite(q)):
            raise ValidationError("orientation must be a finite quaternion", field="orientation")
        norm = float(np.sqrt(sum(v * v for v in q)))
        if abs(norm - 1.0) > QUAT_EXACT_TOL:
            raise ValidationError("quaternion must be unit norm within 1e-9", field="orientation")
        if self.gripper not in (0, 1):
            raise ValidationError("gripper must be 0 or 1", field="gripper")
        if self.t < 1:
            raise ValidationError("timestep must be >= 1", field="t")
        object.__setattr__(self, "orientation", q)
        object.__setattr__(self, "gripper", int(self.gripper))

    def to_dict(self):
        return {"t": self.t, "quaternion": list(self.orientation), "gripper": self.gripper}


def normalize_quaternion(q):
    """Accept a nearly-unit quaternion, reject the rest.

    Within 1e-9 of unit the value passes through untouched, which makes
    repeated application bit-stable; within 10% it is rescaled; anything
    further off is an invalid response, handled by the caller.
    """
    q = tuple(float(v) for v in q)
    if len(q) != 4 or not all(np.isfinite(q)):
        return None
    norm = float(np.sqrt(sum(v * v for v in q)))
    if abs(norm - 1.0) <= QUAT_EXACT_TOL:
        return q
    if abs(norm - 1.0) <= QUAT_NORM_TOL:
        return tuple(v / norm for v in q)
    return None


@dataclass
class ReasoningContext:
    """Everything the reasoning model has seen so far in one session.

    Grows monotonically over the pipeline stages: keypoint descriptors,
    pointed pixels, and finally the lifted 3D trajectory fed back for
    pose scheduling.
    """

    instruction: object
    annotated_image: np.ndarray
    view_ids: tuple
    view_images: tuple
    descriptors: list = field(default_factory=list)
    pointed: list = field(default_factory=list)
    lifted_trajectory: object = None

    def validate(self):
        if len(self.view_ids) != 2 or len(self.view_images) != 2:
            raise ValidationError("context needs exactly two views", field="view_images")
        for img in (self.annotated_image, *self.view_images):
            arr = np.asarray(img)
            if arr.ndim != 3 or arr.shape[2] != 3 or arr.size == 0:
                raise ValidationError("context images must be nonempty HxWx3", field="images")
        for p in self.pointed:
            if not (0 <= p.descriptor_index < len(self.descriptors)):
                raise ValidationError(
                    f"pointed keypoint references descriptor {p.descriptor_index}, "
                    f"have {len(self.descriptors)}",
                    field="pointed",
                )
            if p.view_id not in self.view_ids:
                raise ValidationError(
                    f"pointed keypoint references unknown view {p.view_id!r}", field="pointed"
                )

    def image_for_view(self, view_id):
        for vid, img in zip(self.view_ids, self.view_images):
            if vid == view_id:
                return img
        raise ValidationError(f"unknown view {view_id!r}", field="view_id")


@dataclass(frozen=True)
class ScenarioEntry:
    kind: str
    request_digest: str
    response: object

    def __post_init__(self):
        if self.kind not in REQUEST_KINDS:
            raise ValidationError(f"unknown request kind {self.kind!r}", field="kind")


@dataclass(frozen=True)
class ScriptedScenario:
    """An ordered recording of request/response pairs, keyed by digest.

    A scenario may be partial (unit fixtures often are); a missing entry
    surfaces as an incomplete-scenario error at request time, naming the
    divergent request.
    """

    name: str
    entries: tuple

    def __post_init__(self):
        entries = tuple(self.entries)
        seen = {}
        for e in entries:
            key = (e.kind, e.request_digest)
            if key in seen and seen[key] != e.response:
                raise ValidationError(
                    f"conflicting responses for {e.kind} request {e.request_digest[:12]}",
                    field="entries",
                )
            seen[key] = e.response
        object.__setattr__(self, "entries", entries)
        object.__setattr__(self, "_table", seen)

    def lookup(self, kind, request_digest):
        try:
            response = self._table[(kind, request_digest)]
        except KeyError:
            raise ScenarioIncompleteError(
                f"scenario {self.name!r} has no response for a {kind!r} request "
                f"(digest {request_digest[:12]}...)",
                kind=kind,
                digest=request_digest,
            ) from None
        return copy.deepcopy(response)

    def missing_kinds(self):
        have = {e.kind for e in self.entries}
        return tuple(k for k in REQUEST_KINDS if k not in have)


def scenario_to_dict(scenario: ScriptedScenario) -> dict:
    return {
        "name": scenario.name,
        "entries": [
            {"kind": e.kind, "request_digest": e.request_digest, "response": e.response}
            for e in scenario.entries
        ],
    }


def parse_scenario(data) -> ScriptedScenario:
    if isinstance(data, (bytes, str)):
        try:
            data = json.loads(data)
        except json.JSONDecodeError as e:
            raise ParseError(f"scenario JSON malformed: {e.msg}", offset=e.pos) from e
    try:
        entries = tuple(
            ScenarioEntry(
                kind=str(e["kind"]),
                request_digest=str(e["request_digest"]),
                response=e["response"],
            )
            for e in data["entries"]
        )
        return ScriptedScenario(name=str(data["name"]), entries=entries)
    except KeyError as e:
        raise ParseError(f"scenario missing field {e.args[0]!r}") from e


def dump_scenario(scenario: ScriptedScenario) -> bytes:
    return json.dumps(scenario_to_dict(scenario), indent=2, ensure_ascii=False).encode("utf-8")
