"""Client layer for the reasoning and pointing model roles."""

from .backend import (
    ModelBackend,
    clamp_pixel,
    point_keypoint,
    request_keypoints,
    request_pixel_trajectories,
    request_pose_schedule,
)
from .canonical import canonical_form, canonical_json, request_digest
from .live import LiveBackend, live_backend_from_env, load_prompt_template, render_prompt
from .scripted import RecordingBackend, ScriptedBackend, record_scenario
from .types import (
    REQUEST_KINDS,
    KeypointDescriptor,
    PointedKeypoint,
    PoseStep,
    ReasoningContext,
    ScenarioEntry,
    ScriptedScenario,
    dump_scenario,
    normalize_quaternion,
    parse_scenario,
    scenario_to_dict,
)

__all__ = [
    "ModelBackend",
    "ScriptedBackend",
    "RecordingBackend",
    "LiveBackend",
    "KeypointDescriptor",
    "PointedKeypoint",
    "PoseStep",
    "ReasoningContext",
    "ScenarioEntry",
    "ScriptedScenario",
    "REQUEST_KINDS",
    "request_keypoints",
    "point_keypoint",
    "request_pixel_trajectories",
    "request_pose_schedule",
    "record_scenario",
    "request_digest",
    "canonical_form",
    "canonical_json",
    "clamp_pixel",
    "normalize_quaternion",
    "parse_scenario",
    "dump_scenario",
    "scenario_to_dict",
    "live_backend_from_env",
    "load_prompt_template",
    "render_prompt",
]
