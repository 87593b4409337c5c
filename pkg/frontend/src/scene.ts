// Pure builders that turn service payloads into drawable primitives. The
// canvas code renders whatever these return, which keeps the mapping from
// wire data to screen geometry testable without a DOM.

import { ellipseFromCov, orbitBasis, orbitProject, projectCovariance, projectPoint } from "./geometry";
import type { Ellipse, OrbitCamera } from "./geometry";
import type { Overlays, PlanDoc, Point2, ViewDoc } from "./types";

export type PolylineRole = "trajectory" | "raw" | "reprojected" | "sample";

export interface OverlayPolyline {
  role: PolylineRole;
  points: Point2[];
}

export interface OverlayMarker {
  x: number;
  y: number;
  label: string;
}

export interface ViewOverlayScene {
  viewId: string;
  polylines: OverlayPolyline[];
  markers: OverlayMarker[];
}

/**
 * Assemble the 2D overlay for one camera view: the planned pixel trajectory,
 * the raw sketch polyline it came from, the plan's 3D positions reprojected
 * through the view, and one marker per pointed keypoint.
 */
export function buildViewOverlay(
  viewId: string,
  overlays: Overlays,
  plan: PlanDoc | null,
  views: ViewDoc[],
): ViewOverlayScene {
  const overlay = overlays[viewId];
  const polylines: OverlayPolyline[] = [];
  const markers: OverlayMarker[] = [];
  if (overlay) {
    if (overlay.raw_polyline && overlay.raw_polyline.length > 0) {
      polylines.push({ role: "raw", points: overlay.raw_polyline.map((p) => [p[0], p[1]] as Point2) });
    }
    polylines.push({ role: "trajectory", points: overlay.trajectory.map((p) => [p[0], p[1]] as Point2) });
    for (const pt of overlay.pointed) {
      markers.push({ x: pt.pixel[0], y: pt.pixel[1], label: `#${pt.descriptor_index}` });
    }
  }
  const view = views.find((v) => v.id === viewId);
  if (plan && view) {
    const pts: Point2[] = [];
    for (const step of plan.steps) {
      const px = projectPoint(view, step.position);
      if (px) pts.push(px);
    }
    if (pts.length > 0) polylines.push({ role: "reprojected", points: pts });
  }
  return { viewId, polylines, markers };
}

/** Blue-to-red ramp over normalized time, for waypoint coloring. */
export function colorForT(t: number): string {
  const x = Math.max(0, Math.min(1, t));
  const r = Math.round(40 + 200 * x);
  const g = Math.round(80 + 40 * (1 - Math.abs(2 * x - 1)));
  const b = Math.round(240 - 200 * x);
  return `rgb(${r},${g},${b})`;
}

export interface OrbitPointPrim {
  x: number;
  y: number;
  depth: number;
  t: number;
  color: string;
}

export interface OrbitSegmentPrim {
  x1: number;
  y1: number;
  x2: number;
  y2: number;
  depth: number;
}

export interface OrbitEllipsePrim extends Ellipse {
  x: number;
  y: number;
  depth: number;
}

export interface OrbitScene {
  points: OrbitPointPrim[];
  segments: OrbitSegmentPrim[];
  ellipses: OrbitEllipsePrim[];
  sampleCurves: Point2[][];
}

/**
 * Project the plan's waypoint distribution into the orbit view: one colored
 * point per waypoint, line segments joining consecutive means, optional one
 * standard deviation ellipses, and any sampled trajectories as curves.
 */
export function buildOrbitScene(
  plan: PlanDoc,
  cam: OrbitCamera,
  options: { showEllipsoids?: boolean; samples?: number[][][] } = {},
): OrbitScene {
  const { right, up } = orbitBasis(cam);
  const waypoints = plan.distribution.waypoints;
  const points: OrbitPointPrim[] = [];
  const segments: OrbitSegmentPrim[] = [];
  const ellipses: OrbitEllipsePrim[] = [];
  const denom = Math.max(1, waypoints.length - 1);
  waypoints.forEach((w, i) => {
    const pr = orbitProject(cam, w.mu);
    const t = i / denom;
    points.push({ x: pr.x, y: pr.y, depth: pr.depth, t, color: colorForT(t) });
    if (options.showEllipsoids) {
      const cov = projectCovariance(w.sigma, right, up);
      const e = ellipseFromCov(cov);
      ellipses.push({
        x: pr.x,
        y: pr.y,
        depth: pr.depth,
        rx: e.rx * cam.zoom,
        ry: e.ry * cam.zoom,
        angle: e.angle,
      });
    }
  });
  for (let i = 0; i + 1 < points.length; i++) {
    segments.push({
      x1: points[i].x,
      y1: points[i].y,
      x2: points[i + 1].x,
      y2: points[i + 1].y,
      depth: Math.min(points[i].depth, points[i + 1].depth),
    });
  }
  const sampleCurves: Point2[][] = [];
  for (const traj of options.samples ?? []) {
    const curve: Point2[] = [];
    for (const p of traj) {
      const pr = orbitProject(cam, [p[0], p[1], p[2]]);
      curve.push([pr.x, pr.y]);
    }
    sampleCurves.push(curve);
  }
  return { points, segments, ellipses, sampleCurves };
}
