// Polyline simplification for captured strokes. Pointer events arrive at
// screen resolution, which is far denser than the service needs; we thin the
// stroke before serializing while guaranteeing no original sample strays more
// than the tolerance from the simplified path.

import type { Point2 } from "./types";

function distToSegment(p: Point2, a: Point2, b: Point2): number {
  const dx = b[0] - a[0];
  const dy = b[1] - a[1];
  const lenSq = dx * dx + dy * dy;
  let t = 0;
  if (lenSq > 0) {
    t = ((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / lenSq;
    t = Math.max(0, Math.min(1, t));
  }
  const qx = a[0] + t * dx;
  const qy = a[1] + t * dy;
  return Math.hypot(p[0] - qx, p[1] - qy);
}

function rdp(points: Point2[], lo: number, hi: number, tol: number, keep: boolean[]): void {
  if (hi - lo < 2) return;
  const a = points[lo];
  const b = points[hi];
  let worst = -1;
  let worstIdx = -1;
  for (let i = lo + 1; i < hi; i++) {
    const d = distToSegment(points[i], a, b);
    if (d > worst) {
      worst = d;
      worstIdx = i;
    }
  }
  if (worst > tol) {
    keep[worstIdx] = true;
    rdp(points, lo, worstIdx, tol, keep);
    rdp(points, worstIdx, hi, tol, keep);
  }
}

/**
 * Simplify a polyline so that every input point lies within `tolerance`
 * pixels of the result. Endpoints are always preserved.
 */
export function decimate(points: Point2[], tolerance = 0.5): Point2[] {
  if (points.length <= 2) return points.map((p) => [p[0], p[1]]);
  const keep = new Array<boolean>(points.length).fill(false);
  keep[0] = true;
  keep[points.length - 1] = true;
  rdp(points, 0, points.length - 1, tolerance, keep);
  const out: Point2[] = [];
  for (let i = 0; i < points.length; i++) {
    if (keep[i]) out.push([points[i][0], points[i][1]]);
  }
  return out;
}

/** Largest distance from any original point to the simplified polyline. */
export function maxDeviation(original: Point2[], simplified: Point2[]): number {
  if (simplified.length === 0) return Infinity;
  if (simplified.length === 1) {
    let worst = 0;
    for (const p of original) {
      worst = Math.max(worst, Math.hypot(p[0] - simplified[0][0], p[1] - simplified[0][1]));
    }
    return worst;
  }
  let worst = 0;
  for (const p of original) {
    let best = Infinity;
    for (let i = 0; i + 1 < simplified.length; i++) {
      best = Math.min(best, distToSegment(p, simplified[i], simplified[i + 1]));
      if (best === 0) break;
    }
    worst = Math.max(worst, best);
  }
  return worst;
}
