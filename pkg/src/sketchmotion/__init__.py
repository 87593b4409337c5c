"""Sketch-and-text instructions over calibrated scene images, lifted to
distributions over 3D end-effector trajectories, with an offline RL
refinement loop on top.

Public API is re-exported here; submodules stay importable directly.
"""

__version__ = "0.1.0"

from . import errors
from .errors import SketchMotionError
from .geometry import (
    CameraIntrinsics,
    CameraPose,
    CameraView,
    Ray,
    baseline_angle_deg,
    dump_calibration,
    load_calibration,
    pixel_to_ray,
    project_point,
    ray_ray_closest_points,
    triangulate_midpoint,
)
from .instruction import (
    CrossModalInstruction,
    SceneBundle,
    Stroke,
    StrokeStyle,
    TextLabel,
    dump_scene_bundle,
    instruction_to_dict,
    parse_instruction,
    parse_scene_bundle,
    serialize_instruction,
    validate_scene_bundle,
)
from .lifting import (
    LiftingConfig,
    PixelTrajectory,
    TrajectoryDistribution,
    WaypointGaussian,
    dump_distribution,
    lift_trajectory_pair,
    log_density,
    mean_trajectory,
    parse_distribution,
    resample_equal_length,
    sample_trajectory,
)
from .pipeline import (
    MotionPlan,
    MotionStep,
    PipelineConfig,
    export_plan,
    import_plan,
    plan_diagnostics,
    run_pipeline,
    trace_to_jsonl,
)

__all__ = [
    "CameraIntrinsics",
    "CameraPose",
    "CameraView",
    "CrossModalInstruction",
    "LiftingConfig",
    "MotionPlan",
    "MotionStep",
    "PipelineConfig",
    "PixelTrajectory",
    "Ray",
    "SceneBundle",
    "SketchMotionError",
    "Stroke",
    "StrokeStyle",
    "TextLabel",
    "TrajectoryDistribution",
    "WaypointGaussian",
    "__version__",
    "baseline_angle_deg",
    "dump_calibration",
    "dump_distribution",
    "dump_scene_bundle",
    "errors",
    "export_plan",
    "import_plan",
    "instruction_to_dict",
    "lift_trajectory_pair",
    "load_calibration",
    "log_density",
    "mean_trajectory",
    "parse_distribution",
    "parse_instruction",
    "parse_scene_bundle",
    "pixel_to_ray",
    "plan_diagnostics",
    "project_point",
    "ray_ray_closest_points",
    "resample_equal_length",
    "run_pipeline",
    "sample_trajectory",
    "serialize_instruction",
    "trace_to_jsonl",
    "triangulate_midpoint",
    "validate_scene_bundle",
]
