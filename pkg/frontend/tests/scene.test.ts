import { readFileSync } from "node:fs";
import { join } from "node:path";
import { describe, expect, it } from "vitest";
import { parseCalibration } from "../src/geometry";
import type { OrbitCamera } from "../src/geometry";
import { buildOrbitScene, buildViewOverlay, colorForT } from "../src/scene";
import type { Overlays, PlanDoc } from "../src/types";

const FIXTURES = join(__dirname, "fixtures");
const plan = JSON.parse(readFileSync(join(FIXTURES, "golden_plan.json"), "utf-8")) as PlanDoc;
const overlays = JSON.parse(readFileSync(join(FIXTURES, "overlays_slide.json"), "utf-8")) as Overlays;
const views = parseCalibration(readFileSync(join(FIXTURES, "calibration_fixture_a.json"), "utf-8"));

const CAM: OrbitCamera = { yaw: 0.7, pitch: 0.5, zoom: 150, target: [0, 0, 1] };

describe("view overlays against the recorded plan", () => {
  it("draws one trajectory vertex per plan step in every view", () => {
    for (const view of views) {
      const scene = buildViewOverlay(view.id, overlays, plan, views);
      const traj = scene.polylines.find((p) => p.role === "trajectory");
      expect(traj, `${view.id} trajectory`).toBeDefined();
      expect(traj!.points).toHaveLength(plan.horizon);
    }
  });

  it("reprojects every plan step into both views", () => {
    for (const view of views) {
      const scene = buildViewOverlay(view.id, overlays, plan, views);
      const re = scene.polylines.find((p) => p.role === "reprojected");
      expect(re, `${view.id} reprojection`).toBeDefined();
      expect(re!.points).toHaveLength(plan.steps.length);
      for (const [u, v] of re!.points) {
        expect(Number.isFinite(u)).toBe(true);
        expect(Number.isFinite(v)).toBe(true);
      }
    }
  });

  it("marks each pointed keypoint with its descriptor index", () => {
    const byView: Record<string, number> = { cam1: 7, cam2: 9 };
    for (const view of views) {
      const scene = buildViewOverlay(view.id, overlays, plan, views);
      expect(scene.markers).toHaveLength(overlays[view.id].pointed.length);
      expect(scene.markers).toHaveLength(3);
      expect(scene.markers.map((m) => m.label)).toEqual(["#0", "#1", "#2"]);
      const raw = scene.polylines.find((p) => p.role === "raw");
      expect(raw!.points).toHaveLength(byView[view.id]);
    }
  });

  it("omits what is absent: no overlay entry, no plan", () => {
    const scene = buildViewOverlay("cam9", overlays, plan, views);
    expect(scene.polylines).toHaveLength(0);
    expect(scene.markers).toHaveLength(0);
    const noPlan = buildViewOverlay("cam1", overlays, null, views);
    expect(noPlan.polylines.some((p) => p.role === "reprojected")).toBe(false);
    expect(noPlan.polylines.some((p) => p.role === "trajectory")).toBe(true);
  });
});

describe("orbit scene from the plan distribution", () => {
  it("shows every waypoint, joined in order and colored by time", () => {
    const scene = buildOrbitScene(plan, CAM, { showEllipsoids: false });
    const n = plan.distribution.waypoints.length;
    expect(scene.points).toHaveLength(n);
    expect(scene.segments).toHaveLength(n - 1);
    expect(scene.ellipses).toHaveLength(0);
    expect(scene.points[0].t).toBe(0);
    expect(scene.points[n - 1].t).toBe(1);
    expect(scene.points[0].color).not.toBe(scene.points[n - 1].color);
    // segments share endpoints with the points they join
    expect(scene.segments[0].x1).toBe(scene.points[0].x);
    expect(scene.segments[0].x2).toBe(scene.points[1].x);
  });

  it("adds one ellipse per waypoint when toggled on", () => {
    const scene = buildOrbitScene(plan, CAM, { showEllipsoids: true });
    expect(scene.ellipses).toHaveLength(plan.distribution.waypoints.length);
    for (const e of scene.ellipses) {
      expect(e.rx).toBeGreaterThanOrEqual(e.ry);
      expect(Number.isFinite(e.angle)).toBe(true);
    }
  });

  it("degenerates ellipses to points when the covariance is zero", () => {
    const flat: PlanDoc = {
      ...plan,
      distribution: {
        horizon: 2,
        waypoints: [
          { t: 0, mu: [0, 0, 1], sigma: [0, 0, 0, 0, 0, 0, 0, 0, 0], n_samples: 1 },
          { t: 1, mu: [0.1, 0, 1], sigma: [0, 0, 0, 0, 0, 0, 0, 0, 0], n_samples: 1 },
        ],
      },
    };
    const scene = buildOrbitScene(flat, CAM, { showEllipsoids: true });
    expect(scene.ellipses).toHaveLength(2);
    for (const e of scene.ellipses) {
      expect(e.rx).toBe(0);
      expect(e.ry).toBe(0);
    }
  });

  it("projects sampled trajectories into curves deterministically", () => {
    const samples = [
      plan.steps.map((s) => [s.position[0], s.position[1], s.position[2]]),
      plan.steps.map((s) => [s.position[0] + 0.01, s.position[1], s.position[2]]),
    ];
    const a = buildOrbitScene(plan, CAM, { samples });
    const b = buildOrbitScene(plan, CAM, { samples });
    expect(a.sampleCurves).toHaveLength(2);
    expect(a.sampleCurves[0]).toHaveLength(plan.horizon);
    expect(a.sampleCurves).toEqual(b.sampleCurves);
  });
});

describe("colorForT", () => {
  it("clamps and stays in rgb bounds", () => {
    expect(colorForT(-1)).toBe(colorForT(0));
    expect(colorForT(2)).toBe(colorForT(1));
    for (const t of [0, 0.25, 0.5, 0.75, 1]) {
      const m = colorForT(t).match(/^rgb\((\d+),(\d+),(\d+)\)$/);
      expect(m).not.toBeNull();
      for (const c of m!.slice(1)) {
        expect(Number(c)).toBeGreaterThanOrEqual(0);
        expect(Number(c)).toBeLessThanOrEqual(255);
      }
    }
  });
});
