"""Generate the committed test fixtures under tests/fixtures/.

Everything here is deterministic: camera pair, synthetic scene renders,
the slide instruction, a scripted scenario recorded from a stub model
backend, and the golden plan produced by replaying that scenario. Rerun
after changing any format and commit the results.
"""

import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from sketchmotion.geometry import CameraIntrinsics, CameraPose, CameraView, dump_calibration, project_point
from sketchmotion.instruction import dump_scene_bundle, parse_instruction, parse_scene_bundle, SceneBundle
from sketchmotion.models import ModelBackend, ScriptedBackend, dump_scenario, parse_scenario, record_scenario
from sketchmotion.pipeline import PipelineConfig, export_plan, plan_diagnostics, run_pipeline
from sketchmotion.raster import save_image

FIXDIR = Path(__file__).resolve().parents[1] / "tests" / "fixtures"

# Tabletop workspace centered at (0, 0, 1); both cameras 1 m away with a
# 90 degree baseline. cam1 sits at the origin looking along +z, cam2 at
# (1, 0, 1) looking along -x.
INTRINSICS = CameraIntrinsics(fx=100.0, fy=100.0, cx=50.0, cy=50.0, width=100, height=100)
VIEW1 = CameraView(id="cam1", intrinsics=INTRINSICS, pose=CameraPose(rotation=np.eye(3), translation=np.zeros(3)))
VIEW2 = CameraView(
    id="cam2",
    intrinsics=INTRINSICS,
    pose=CameraPose(
        rotation=np.array([[0.0, 0.0, -1.0], [0.0, 1.0, 0.0], [1.0, 0.0, 0.0]]),
        translation=np.array([1.0, 0.0, 1.0]),
    ),
)
VIEWS = {"cam1": VIEW1, "cam2": VIEW2}

# The slide path: constant x and z so both projections are affine in y,
# which keeps per-timestep pixels in the two views pointing at the same
# 3D point after equal-length resampling.
PATH_X, PATH_Z = 0.1, 1.1
PATH_Y0, PATH_Y1 = -0.15, 0.2

ANCHORS = {
    "block top face": np.array([PATH_X, PATH_Y0, PATH_Z + 0.02]),
    "target square center": np.array([PATH_X, PATH_Y1, PATH_Z]),
    "pre-push approach point": np.array([PATH_X, PATH_Y0 - 0.05, PATH_Z + 0.05]),
}


def path_point(s: float) -> np.ndarray:
    return np.array([PATH_X, PATH_Y0 + s * (PATH_Y1 - PATH_Y0), PATH_Z])


def projected_polyline(view: CameraView, n_points: int) -> list:
    pts = []
    for i in range(n_points):
        uv = project_point(view, path_point(i / (n_points - 1)))
        pts.append([round(float(uv[0]), 2), round(float(uv[1]), 2)])
    return pts


class SlideStub(ModelBackend):
    """Deterministic stand-in for the two models, used once for recording."""

    def send(self, kind: str, payload: dict) -> dict:
        if kind == "keypoints":
            return {
                "descriptors": [
                    {"label": "block top face", "metadata": "graspable surface of the sliding block"},
                    {"label": "target square center", "metadata": "where the block should come to rest"},
                    {"label": "pre-push approach point", "metadata": "free space behind the block"},
                ]
            }
        if kind == "point":
            view = VIEWS[payload["view_id"]]
            uv = project_point(view, ANCHORS[payload["descriptor"]["label"]])
            return {"pixel": [round(float(uv[0]), 1), round(float(uv[1]), 1)]}
        if kind == "trajectories":
            return {
                "polylines": [
                    projected_polyline(VIEWS[payload["view_ids"][0]], 7),
                    projected_polyline(VIEWS[payload["view_ids"][1]], 9),
                ]
            }
        if kind == "poses":
            horizon = len(payload["trajectory_3d"])
            return {
                "steps": [
                    {"t": i + 1, "quaternion": [0.0, 1.0, 0.0, 0.0], "gripper": 0}
                    for i in range(horizon)
                ]
            }
        raise AssertionError(f"unexpected request kind {kind!r}")

    def describe(self) -> str:
        return "stub:slide"


def render_scene(view: CameraView) -> np.ndarray:
    """Flat synthetic tabletop: block square, target outline, soft gradient."""
    img = np.zeros((100, 100, 3), dtype=np.uint8)
    rows = np.arange(100, dtype=float)[:, None]
    img[:, :, :] = (205.0 - 0.35 * rows).astype(np.uint8)[:, :, None]

    def px(world):
        uv = project_point(view, world)
        return int(round(float(uv[0]))), int(round(float(uv[1])))

    bu, bv = px(np.array([PATH_X, PATH_Y0, PATH_Z]))
    img[max(bv - 6, 0) : bv + 7, max(bu - 6, 0) : bu + 7] = (96, 72, 48)
    tu, tv = px(np.array([PATH_X, PATH_Y1, PATH_Z]))
    img[tv - 8 : tv + 9, tu - 8 : tu + 9] = (150, 170, 150)
    img[tv - 6 : tv + 7, tu - 6 : tu + 7] = (205 - int(0.35 * tv),) * 3
    return img


INSTRUCTION_DOC = {
    "version": "crossinstruct/1",
    "image_ref": "cam1",
    "strokes": [
        {
            "kind": "arrow",
            "points": [[59.0, 38.0], [59.0, 52.0], [59.0, 66.0]],
            "style": {"rgba": [255, 64, 32, 255], "width": 2.0},
        },
        {
            "kind": "boundary",
            "points": [[52.0, 30.0], [66.0, 30.0], [66.0, 43.0], [52.0, 43.0]],
            "style": {"rgba": [32, 64, 255, 255], "width": 1.5},
        },
    ],
    "labels": [{"text": "slide the block to the target square", "anchor": [4.0, 4.0]}],
}


def main() -> int:
    FIXDIR.mkdir(parents=True, exist_ok=True)
    (FIXDIR / "calibration_fixture_a.json").write_bytes(dump_calibration([VIEW1, VIEW2]))
    for view, name in ((VIEW1, "scene_cam1.png"), (VIEW2, "scene_cam2.png")):
        save_image(FIXDIR / name, render_scene(view))
    bundle = SceneBundle(
        views=(VIEW1, VIEW2), image_paths=("scene_cam1.png", "scene_cam2.png")
    )
    (FIXDIR / "scene_bundle.json").write_bytes(dump_scene_bundle(bundle))
    (FIXDIR / "instruction_slide.json").write_text(
        json.dumps(INSTRUCTION_DOC, indent=2) + "\n"
    )

    config = PipelineConfig.from_dict({"horizon": 20, "lifting": {"rng_seed": 7}})
    (FIXDIR / "pipeline_config_slide.json").write_text(
        json.dumps(config.to_dict(), indent=2, sort_keys=True) + "\n"
    )

    # Resolve image paths the way the CLI does before running anything.
    runnable = parse_scene_bundle((FIXDIR / "scene_bundle.json").read_bytes())
    runnable = SceneBundle(
        views=runnable.views,
        image_paths=tuple(str(FIXDIR / p) for p in runnable.image_paths),
        min_baseline_deg=runnable.min_baseline_deg,
    )
    instruction = parse_instruction((FIXDIR / "instruction_slide.json").read_bytes())

    def drive(backend):
        run_pipeline(instruction, runnable, config, backend)

    scenario = record_scenario(SlideStub(), "slide", drive)
    (FIXDIR / "scenario_slide.json").write_bytes(dump_scenario(scenario))

    # The golden comes from a replay, not the recording run, so its
    # provenance names the scripted backend exactly the way replays will.
    replay = ScriptedBackend(parse_scenario((FIXDIR / "scenario_slide.json").read_bytes()))
    artifacts = {}
    plan = run_pipeline(instruction, runnable, config, replay, artifacts=artifacts)
    golden = export_plan(plan)
    (FIXDIR / "golden_plan.json").write_bytes(golden)

    again = export_plan(run_pipeline(instruction, runnable, config, replay))
    if again != golden:
        print("FATAL: replay is not deterministic", file=sys.stderr)
        return 1
    diag = plan_diagnostics(plan, runnable, artifacts["xi"])
    print(f"scenario entries: {len(scenario.entries)}")
    print(f"golden sha256: {hashlib.sha256(golden).hexdigest()}")
    print(f"max reprojection error: {diag['max_reproj_px']:.3f} px")
    print(f"max sigma trace: {diag['max_sigma_trace']:.6f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
