// Camera projection and covariance helpers for the inspection panels.
// Mirrors the service's pinhole convention: pose rotation is world-from-camera
// (row major), translation is the camera center in world coordinates.

import type { Point2, Point3, ViewDoc } from "./types";

/** Read a calibration document: either a bare list of views or {"views": [...]}. */
export function parseCalibration(text: string): ViewDoc[] {
  const doc = JSON.parse(text);
  const list = Array.isArray(doc) ? doc : (doc.views ?? []);
  if (!Array.isArray(list)) throw new Error("calibration must list camera views");
  return list as ViewDoc[];
}

/**
 * Project a world point into a view. Returns null when the point sits at or
 * behind the camera plane, so callers can break the polyline there.
 */
export function projectPoint(view: ViewDoc, p: Point3): Point2 | null {
  const r = view.pose.rotation;
  const c = view.pose.translation;
  const dx = p[0] - c[0];
  const dy = p[1] - c[1];
  const dz = p[2] - c[2];
  // camera coords via R^T (world-from-camera transposed)
  const x = r[0] * dx + r[3] * dy + r[6] * dz;
  const y = r[1] * dx + r[4] * dy + r[7] * dz;
  const z = r[2] * dx + r[5] * dy + r[8] * dz;
  if (z <= 0) return null;
  const k = view.intrinsics;
  return [k.fx * (x / z) + k.cx, k.fy * (y / z) + k.cy];
}

/** Orbit camera state for the 3D panel: angles in radians, orthographic. */
export interface OrbitCamera {
  yaw: number;
  pitch: number;
  zoom: number; // pixels per world unit
  target: Point3;
}

export function orbitBasis(cam: OrbitCamera): { right: Point3; up: Point3; forward: Point3 } {
  const cy = Math.cos(cam.yaw);
  const sy = Math.sin(cam.yaw);
  const cp = Math.cos(cam.pitch);
  const sp = Math.sin(cam.pitch);
  // forward points from the camera toward the target
  const forward: Point3 = [cp * cy, cp * sy, -sp];
  const right: Point3 = [-sy, cy, 0];
  const up: Point3 = [
    right[1] * forward[2] - right[2] * forward[1],
    right[2] * forward[0] - right[0] * forward[2],
    right[0] * forward[1] - right[1] * forward[0],
  ];
  return { right, up, forward };
}

/**
 * Orthographic projection for the orbit view. Returns screen offsets from the
 * panel center plus a depth used for painter-order sorting.
 */
export function orbitProject(cam: OrbitCamera, p: Point3): { x: number; y: number; depth: number } {
  const { right, up, forward } = orbitBasis(cam);
  const dx = p[0] - cam.target[0];
  const dy = p[1] - cam.target[1];
  const dz = p[2] - cam.target[2];
  const x = (dx * right[0] + dy * right[1] + dz * right[2]) * cam.zoom;
  const y = -(dx * up[0] + dy * up[1] + dz * up[2]) * cam.zoom;
  const depth = dx * forward[0] + dy * forward[1] + dz * forward[2];
  return { x, y, depth };
}

/**
 * Push a 3x3 covariance (row major) through a 2x3 projection basis, giving
 * the 2x2 covariance of the projected point: B Sigma B^T.
 */
export function projectCovariance(sigma: number[], right: Point3, up: Point3): [number, number, number, number] {
  const rows: Point3[] = [right, up];
  const out: number[] = [];
  for (let i = 0; i < 2; i++) {
    for (let j = 0; j < 2; j++) {
      let acc = 0;
      for (let a = 0; a < 3; a++) {
        for (let b = 0; b < 3; b++) {
          acc += rows[i][a] * sigma[a * 3 + b] * rows[j][b];
        }
      }
      out.push(acc);
    }
  }
  return [out[0], out[1], out[2], out[3]];
}

export interface Ellipse {
  rx: number;
  ry: number;
  angle: number; // radians, major axis from +x
}

/**
 * Closed-form eigendecomposition of a symmetric 2x2 covariance into an
 * ellipse at one standard deviation. A zero covariance degenerates to a point.
 */
export function ellipseFromCov(cov: [number, number, number, number]): Ellipse {
  const a = cov[0];
  const b = (cov[1] + cov[2]) / 2;
  const c = cov[3];
  const tr = a + c;
  const det = a * c - b * b;
  const disc = Math.sqrt(Math.max(0, (tr * tr) / 4 - det));
  const l1 = Math.max(0, tr / 2 + disc);
  const l2 = Math.max(0, tr / 2 - disc);
  let angle = 0;
  if (Math.abs(b) > 1e-300) {
    angle = Math.atan2(l1 - a, b);
  } else if (c > a) {
    angle = Math.PI / 2;
  }
  return { rx: Math.sqrt(l1), ry: Math.sqrt(l2), angle };
}
