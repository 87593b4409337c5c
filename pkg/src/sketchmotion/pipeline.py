"""End-to-end orchestration: instruction + scene bundle to MotionPlan.

Stage order is fixed: rasterize the annotated instruction, ask for
keypoint descriptors, ground each one to pixels in both views, ask for
the 2D motion over both views, resample to a common horizon, lift to a
3D distribution, then schedule orientation and gripper along its mean.
Every stage is traced with input/output digests so a run can be audited
and replayed.
"""

import hashlib
import json
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    InsufficientKeypointsError,
    InvalidResponseError,
    ParseError,
    PipelineStageError,
    SketchMotionError,
    ValidationError,
)
from .geometry import project_point
from .instruction import CrossModalInstruction, SceneBundle, validate_scene_bundle
from .lifting import (
    LiftingConfig,
    PixelTrajectory,
    TrajectoryDistribution,
    distribution_from_dict,
    distribution_to_dict,
    lift_trajectory_pair,
    mean_trajectory,
    resample_equal_length,
)
from .models.backend import (
    point_keypoint,
    request_keypoints,
    request_pixel_trajectories,
    request_pose_schedule,
)
from .models.canonical import request_digest
from .models.types import PointedKeypoint, ReasoningContext
from .raster import load_image, rasterize_overlay

STAGES = (
    "scene-validate",
    "load-images",
    "rasterize",
    "keypoints",
    "pointing",
    "trajectories",
    "resample",
    "lift",
    "poses",
    "assemble",
)


@dataclass(frozen=True)
class MotionStep:
    """One timestep of the executable plan: where, facing how, grip state."""

    t: int
    position: tuple
    orientation: tuple
    gripper: int

    def __post_init__(self):
        pos = tuple(float(v) for v in self.position)
        if len(pos) != 3 or not all(np.isfinite(pos)):
            raise ValidationError("position must be a finite 3-vector", field="position")
        q = tuple(float(v) for v in self.orientation)
        norm = float(np.sqrt(sum(v * v for v in q)))
        if len(q) != 4 or abs(norm - 1.0) > 1e-9:
            raise ValidationError("orientation must be a unit quaternion", field="orientation")
        if self.gripper not in (0, 1):
            raise ValidationError("gripper must be 0 or 1", field="gripper")
        if self.t < 1:
            raise ValidationError("timestep must be >= 1", field="t")
        object.__setattr__(self, "position", pos)
        object.__setattr__(self, "orientation", q)
        object.__setattr__(self, "gripper", int(self.gripper))


@dataclass(frozen=True)
class MotionPlan:
    """Executable step sequence plus the distribution it was drawn from.

    Step positions are exactly the distribution means; the plan is the
    open-loop execution of the expected trajectory.
    """

    steps: tuple
    distribution: TrajectoryDistribution
    provenance: dict

    def __post_init__(self):
        steps = tuple(self.steps)
        if len(steps) != self.distribution.horizon:
            raise ValidationError(
                f"plan has {len(steps)} steps but distribution horizon is "
                f"{self.distribution.horizon}",
                field="steps",
            )
        for i, step in enumerate(steps):
            if step.t != i + 1:
                raise ValidationError("steps must be ordered t = 1..H", field="steps")
            mu = self.distribution.waypoints[i].mu
            if tuple(float(v) for v in mu) != step.position:
                raise ValidationError(
                    f"step {step.t} position differs from distribution mean", field="steps"
                )
        object.__setattr__(self, "steps", steps)

    @property
    def horizon(self):
        return len(self.steps)


@dataclass(frozen=True)
class PipelineConfig:
    """Run parameters: horizon, lifting settings, backend selection."""

    horizon: int = 50
    lifting: LiftingConfig = field(default_factory=LiftingConfig)
    backend: str = "scripted"
    min_descriptors: int = 1

    def __post_init__(self):
        if self.horizon < 2:
            raise ValidationError("horizon must be >= 2", field="horizon")
        if self.min_descriptors < 1:
            raise ValidationError("min_descriptors must be >= 1", field="min_descriptors")

    def to_dict(self):
        return {
            "horizon": self.horizon,
            "lifting": self.lifting.to_dict(),
            "backend": self.backend,
            "min_descriptors": self.min_descriptors,
        }

    @classmethod
    def from_dict(cls, d):
        kwargs = {}
        if "horizon" in d:
            kwargs["horizon"] = int(d["horizon"])
        if "lifting" in d:
            kwargs["lifting"] = LiftingConfig.from_dict(d["lifting"])
        if "backend" in d:
            kwargs["backend"] = str(d["backend"])
        if "min_descriptors" in d:
            kwargs["min_descriptors"] = int(d["min_descriptors"])
        return cls(**kwargs)

    def digest(self) -> str:
        doc = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(doc.encode("utf-8")).hexdigest()


class _Tracer:
    """Collects one record per stage; `sink` is a caller-owned list."""

    def __init__(self, sink):
        self.sink = sink

    def record(self, stage, input_payload, output_payload, diagnostics):
        if self.sink is None:
            return
        self.sink.append(
            {
                "stage": stage,
                "started_at": time.time(),
                "input_digest": request_digest(f"stage:{stage}", {"value": input_payload}),
                "output_digest": request_digest(f"stage:{stage}", {"value": output_payload}),
                "diagnostics": list(diagnostics),
            }
        )


def _run_stage(stage, tracer, input_payload, fn):
    """Run one stage body, wrapping library errors with the stage name."""
    diagnostics = []
    try:
        result, output_payload = fn(diagnostics)
    except PipelineStageError:
        raise
    except SketchMotionError as e:
        raise PipelineStageError(stage, e) from e
    tracer.record(stage, input_payload, output_payload, diagnostics)
    return result


def run_pipeline(
    instruction: CrossModalInstruction,
    bundle: SceneBundle,
    config: PipelineConfig,
    backend,
    instruction_image=None,
    trace=None,
    artifacts=None,
) -> MotionPlan:
    """Produce a MotionPlan for one cross-modal instruction.

    `instruction_image` supplies the raster the sketches were drawn on;
    when omitted, instruction.image_ref must name a bundle view (whose
    image is used) or a readable image path. `trace` (a list) receives
    one record per stage; `artifacts` (a dict) receives intermediates
    the service exposes for overlay rendering.
    """
    tracer = _Tracer(trace)
    if artifacts is None:
        artifacts = {}

    def stage_scene_validate(diags):
        diagnostics = validate_scene_bundle(bundle)
        if diagnostics:
            raise ValidationError("; ".join(diagnostics), field="bundle")
        return None, {"views": [v.id for v in bundle.views]}

    _run_stage(
        "scene-validate",
        tracer,
        {"views": [v.to_dict() for v in bundle.views]},
        stage_scene_validate,
    )
    view1, view2 = bundle.views

    def stage_load_images(diags):
        images = tuple(load_image(p) for p in bundle.image_paths)
        if instruction_image is not None:
            instr_img = np.asarray(instruction_image)
        else:
            ref = instruction.image_ref
            by_id = {v.id: img for v, img in zip(bundle.views, images)}
            if ref in by_id:
                instr_img = by_id[ref]
                diags.append(f"instruction image taken from view {ref!r}")
            else:
                instr_img = load_image(ref)
        return (images, instr_img), {
            "view_images": list(images),
            "instruction_image": instr_img,
        }

    (view_images, instr_img) = _run_stage(
        "load-images", tracer, {"paths": list(bundle.image_paths)}, stage_load_images
    )

    def stage_rasterize(diags):
        annotated = rasterize_overlay(instr_img, instruction)
        return annotated, {"annotated": annotated}

    annotated = _run_stage(
        "rasterize",
        tracer,
        {"image": instr_img, "strokes": len(instruction.strokes), "labels": len(instruction.labels)},
        stage_rasterize,
    )
    context = ReasoningContext(
        instruction=instruction,
        annotated_image=annotated,
        view_ids=(view1.id, view2.id),
        view_images=view_images,
    )

    def stage_keypoints(diags):
        descriptors = request_keypoints(backend, context)
        if len(descriptors) < config.min_descriptors:
            raise InsufficientKeypointsError(
                f"model returned {len(descriptors)} descriptors, need {config.min_descriptors}"
            )
        context.descriptors = list(descriptors)
        return descriptors, {"descriptors": [d.to_dict() for d in descriptors]}

    descriptors = _run_stage("keypoints", tracer, {"annotated": annotated}, stage_keypoints)

    def stage_pointing(diags):
        dropped = set()
        grounded = {}
        for index, descriptor in enumerate(descriptors):
            for view_id in sorted(context.view_ids):
                if index in dropped:
                    continue
                try:
                    pk = point_keypoint(
                        backend,
                        descriptor,
                        context.image_for_view(view_id),
                        view_id,
                        descriptor_index=index,
                        diagnostics=diags,
                    )
                except InvalidResponseError as e:
                    dropped.add(index)
                    grounded.pop(index, None)
                    diags.append(f"dropped descriptor {index} ({descriptor.label!r}): {e}")
                    continue
                grounded.setdefault(index, []).append(pk)
        kept = [i for i in range(len(descriptors)) if i not in dropped]
        if len(kept) < config.min_descriptors:
            raise InsufficientKeypointsError(
                f"{len(kept)} descriptors survived pointing, need {config.min_descriptors}"
            )
        context.descriptors = [descriptors[i] for i in kept]
        remap = {old: new for new, old in enumerate(kept)}
        pointed = [
            PointedKeypoint(
                descriptor_index=remap[pk.descriptor_index], view_id=pk.view_id, pixel=pk.pixel
            )
            for i in kept
            for pk in grounded[i]
        ]
        pointed.sort(key=lambda p: (p.descriptor_index, p.view_id))
        context.pointed = pointed
        return pointed, {"pointed": [p.to_dict() for p in pointed]}

    pointed = _run_stage(
        "pointing", tracer, {"descriptors": [d.to_dict() for d in descriptors]}, stage_pointing
    )

    def stage_trajectories(diags):
        raw = request_pixel_trajectories(backend, context)
        for view_id, poly in zip(context.view_ids, raw):
            arr = np.asarray(poly)
            for p in context.pointed:
                if p.view_id != view_id:
                    continue
                gap = float(np.linalg.norm(arr - np.asarray(p.pixel), axis=1).min())
                diags.append(
                    f"view {view_id!r} keypoint {p.descriptor_index} "
                    f"min polyline distance {gap:.2f} px"
                )
        return raw, {"polylines": [np.asarray(p) for p in raw]}

    raw_polylines = _run_stage(
        "trajectories", tracer, {"pointed": [p.to_dict() for p in pointed]}, stage_trajectories
    )

    def stage_resample(diags):
        xi = tuple(
            PixelTrajectory(view_id=v.id, points=resample_equal_length(poly, config.horizon))
            for v, poly in zip(bundle.views, raw_polylines)
        )
        return xi, {"points": [x.points for x in xi]}

    xi = _run_stage(
        "resample",
        tracer,
        {"polylines": [np.asarray(p) for p in raw_polylines], "horizon": config.horizon},
        stage_resample,
    )

    def stage_lift(diags):
        dist = lift_trajectory_pair(xi[0], xi[1], (view1, view2), config.lifting)
        return dist, distribution_to_dict(dist)

    distribution = _run_stage(
        "lift", tracer, {"config": config.lifting.to_dict()}, stage_lift
    )

    def stage_poses(diags):
        context.lifted_trajectory = mean_trajectory(distribution)
        steps = request_pose_schedule(backend, context)
        return steps, {"steps": [s.to_dict() for s in steps]}

    pose_steps = _run_stage(
        "poses", tracer, {"mean": mean_trajectory(distribution)}, stage_poses
    )

    def stage_assemble(diags):
        plan = assemble_plan(distribution, pose_steps, backend, config)
        return plan, plan_to_dict(plan)

    plan = _run_stage("assemble", tracer, {"horizon": config.horizon}, stage_assemble)
    artifacts.update(
        {
            "annotated_image": annotated,
            "descriptors": list(context.descriptors),
            "pointed": list(pointed),
            "raw_polylines": tuple(np.asarray(p) for p in raw_polylines),
            "xi": xi,
        }
    )
    return plan


def assemble_plan(distribution, pose_steps, backend, config: PipelineConfig) -> MotionPlan:
    """Combine distribution means with the pose schedule into a plan."""
    if len(pose_steps) != distribution.horizon:
        raise ValidationError(
            f"pose schedule length {len(pose_steps)} does not match horizon "
            f"{distribution.horizon}",
            field="steps",
        )
    steps = tuple(
        MotionStep(
            t=wp.t,
            position=tuple(float(v) for v in wp.mu),
            orientation=ps.orientation,
            gripper=ps.gripper,
        )
        for wp, ps in zip(distribution.waypoints, pose_steps)
    )
    provenance = {
        "backend": backend.describe() if hasattr(backend, "describe") else str(backend),
        "rng_seed": config.lifting.rng_seed,
        "config_digest": config.digest(),
    }
    return MotionPlan(steps=steps, distribution=distribution, provenance=provenance)


def plan_to_dict(plan: MotionPlan) -> dict:
    return {
        "horizon": plan.horizon,
        "steps": [
            {
                "t": s.t,
                "position": list(s.position),
                "quaternion": list(s.orientation),
                "gripper": s.gripper,
            }
            for s in plan.steps
        ],
        "distribution": distribution_to_dict(plan.distribution),
        "provenance": dict(plan.provenance),
    }


def export_plan(plan: MotionPlan) -> bytes:
    """Serialize a plan; same plan, same bytes."""
    return json.dumps(plan_to_dict(plan), indent=2).encode("utf-8")


def import_plan(data) -> MotionPlan:
    """Parse and revalidate a plan file."""
    if isinstance(data, (bytes, str)):
        try:
            data = json.loads(data)
        except json.JSONDecodeError as e:
            raise ParseError(f"plan JSON malformed: {e.msg}", offset=e.pos) from e
    if not isinstance(data, dict):
        raise ParseError("plan document must be a JSON object")
    try:
        steps = tuple(
            MotionStep(
                t=int(s["t"]),
                position=tuple(s["position"]),
                orientation=tuple(s["quaternion"]),
                gripper=int(s["gripper"]),
            )
            for s in data["steps"]
        )
        distribution = distribution_from_dict(data["distribution"])
        provenance = dict(data.get("provenance", {}))
    except KeyError as e:
        raise ParseError(f"plan missing field {e.args[0]!r}") from e
    except TypeError as e:
        raise ParseError(f"plan field has wrong type: {e}") from e
    if "horizon" in data and int(data["horizon"]) != len(steps):
        raise ParseError("plan horizon does not match step count")
    return MotionPlan(steps=steps, distribution=distribution, provenance=provenance)


def trace_to_jsonl(trace) -> bytes:
    lines = [json.dumps(rec, sort_keys=True) for rec in trace]
    return ("\n".join(lines) + "\n").encode("utf-8")


def plan_diagnostics(plan: MotionPlan, bundle: SceneBundle, xi) -> dict:
    """Reprojection QA: how well do the plan's means explain the 2D inputs.

    Per timestep, the 3D mean is projected into each view and compared
    with that view's pixel waypoint; the report also carries the largest
    covariance trace and the gripper transition count.
    """
    xi1, xi2 = xi
    per_view = {xi1.view_id: xi1, xi2.view_id: xi2}
    rows = []
    max_err = 0.0
    for i, step in enumerate(plan.steps):
        entry = {"t": step.t, "reproj_px": {}, "sigma_trace": float(
            np.trace(plan.distribution.waypoints[i].sigma)
        )}
        for view in bundle.views:
            traj = per_view[view.id]
            try:
                uv = project_point(view, np.asarray(step.position))
                err = float(np.linalg.norm(uv - traj.points[i]))
            except SketchMotionError:
                err = float("inf")
            entry["reproj_px"][view.id] = err
            max_err = max(max_err, err)
        rows.append(entry)
    transitions = sum(
        1 for a, b in zip(plan.steps[:-1], plan.steps[1:]) if a.gripper != b.gripper
    )
    return {
        "per_timestep": rows,
        "max_reproj_px": max_err,
        "max_sigma_trace": max(r["sigma_trace"] for r in rows),
        "gripper_transitions": transitions,
    }
