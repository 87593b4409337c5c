// Canvas rendering for annotation and inspection panels. Pure drawing only;
// all geometry decisions happen in scene.ts so this file stays a thin shell.

import type { OrbitScene, OverlayMarker, OverlayPolyline, ViewOverlayScene } from "./scene";
import type { Point2, Stroke, StrokeStyle, TextLabel } from "./types";

export function rgbaToCss(rgba: [number, number, number, number]): string {
  return `rgba(${rgba[0]},${rgba[1]},${rgba[2]},${rgba[3] / 255})`;
}

function tracePolyline(ctx: CanvasRenderingContext2D, points: Point2[]) {
  ctx.beginPath();
  ctx.moveTo(points[0][0], points[0][1]);
  for (let i = 1; i < points.length; i++) {
    ctx.lineTo(points[i][0], points[i][1]);
  }
}

function drawArrowHead(ctx: CanvasRenderingContext2D, from: Point2, to: Point2, size: number) {
  const angle = Math.atan2(to[1] - from[1], to[0] - from[0]);
  ctx.beginPath();
  ctx.moveTo(to[0], to[1]);
  ctx.lineTo(to[0] - size * Math.cos(angle - Math.PI / 6), to[1] - size * Math.sin(angle - Math.PI / 6));
  ctx.moveTo(to[0], to[1]);
  ctx.lineTo(to[0] - size * Math.cos(angle + Math.PI / 6), to[1] - size * Math.sin(angle + Math.PI / 6));
  ctx.stroke();
}

export function drawStroke(ctx: CanvasRenderingContext2D, stroke: Stroke) {
  if (stroke.points.length < 2) return;
  ctx.save();
  ctx.strokeStyle = rgbaToCss(stroke.style.rgba);
  ctx.lineWidth = stroke.style.width;
  ctx.lineJoin = "round";
  ctx.lineCap = "round";
  tracePolyline(ctx, stroke.points);
  if (stroke.kind === "boundary") ctx.closePath();
  ctx.stroke();
  if (stroke.kind === "arrow") {
    const n = stroke.points.length;
    drawArrowHead(ctx, stroke.points[n - 2], stroke.points[n - 1], Math.max(8, stroke.style.width * 3));
  }
  ctx.restore();
}

/** Live preview while the pointer is still down, same look as the final stroke. */
export function drawPendingStroke(ctx: CanvasRenderingContext2D, kind: string, points: Point2[], style: StrokeStyle) {
  if (points.length < 2) return;
  drawStroke(ctx, { kind: kind as Stroke["kind"], points, style });
}

export function drawLabel(ctx: CanvasRenderingContext2D, label: TextLabel, highlight = false) {
  ctx.save();
  ctx.font = "13px sans-serif";
  const pad = 3;
  const w = ctx.measureText(label.text).width;
  ctx.fillStyle = highlight ? "rgba(220,60,60,0.9)" : "rgba(20,20,30,0.75)";
  ctx.fillRect(label.anchor[0] - pad, label.anchor[1] - 13, w + pad * 2, 17);
  ctx.fillStyle = "#fff";
  ctx.fillText(label.text, label.anchor[0], label.anchor[1]);
  ctx.restore();
}

const ROLE_STYLE: Record<string, { stroke: string; width: number; dash: number[] }> = {
  raw: { stroke: "rgba(255,255,255,0.45)", width: 1, dash: [4, 3] },
  trajectory: { stroke: "#ffb347", width: 2, dash: [] },
  reprojected: { stroke: "#69d2ff", width: 1.5, dash: [6, 3] },
  sample: { stroke: "rgba(160,160,255,0.5)", width: 1, dash: [] },
};

export function drawOverlayPolyline(ctx: CanvasRenderingContext2D, line: OverlayPolyline) {
  if (line.points.length < 2) return;
  const style = ROLE_STYLE[line.role] ?? ROLE_STYLE.trajectory;
  ctx.save();
  ctx.strokeStyle = style.stroke;
  ctx.lineWidth = style.width;
  ctx.setLineDash(style.dash);
  tracePolyline(ctx, line.points);
  ctx.stroke();
  ctx.restore();
}

export function drawMarker(ctx: CanvasRenderingContext2D, marker: OverlayMarker) {
  ctx.save();
  ctx.fillStyle = "#ff5470";
  ctx.strokeStyle = "#fff";
  ctx.lineWidth = 1;
  ctx.beginPath();
  ctx.arc(marker.x, marker.y, 4, 0, Math.PI * 2);
  ctx.fill();
  ctx.stroke();
  ctx.font = "11px sans-serif";
  ctx.fillStyle = "#fff";
  ctx.fillText(marker.label, marker.x + 6, marker.y - 6);
  ctx.restore();
}

export function drawViewOverlayScene(ctx: CanvasRenderingContext2D, scene: ViewOverlayScene) {
  for (const line of scene.polylines) drawOverlayPolyline(ctx, line);
  for (const marker of scene.markers) drawMarker(ctx, marker);
}

/** Render the orbit panel. Primitives are in offsets from the panel center. */
export function drawOrbitScene(ctx: CanvasRenderingContext2D, scene: OrbitScene, width: number, height: number) {
  const cx = width / 2;
  const cy = height / 2;
  ctx.save();
  ctx.clearRect(0, 0, width, height);
  ctx.fillStyle = "#16161e";
  ctx.fillRect(0, 0, width, height);
  ctx.translate(cx, cy);

  for (const curve of scene.sampleCurves) {
    if (curve.length < 2) continue;
    ctx.strokeStyle = ROLE_STYLE.sample.stroke;
    ctx.lineWidth = 1;
    tracePolyline(ctx, curve);
    ctx.stroke();
  }

  for (const e of scene.ellipses) {
    ctx.strokeStyle = "rgba(120,220,160,0.5)";
    ctx.lineWidth = 1;
    ctx.beginPath();
    if (e.rx === 0 && e.ry === 0) {
      // degenerate covariance: a dot instead of an ellipse
      ctx.arc(e.x, e.y, 1, 0, Math.PI * 2);
    } else {
      ctx.ellipse(e.x, e.y, Math.max(e.rx, 0.5), Math.max(e.ry, 0.5), e.angle, 0, Math.PI * 2);
    }
    ctx.stroke();
  }

  ctx.lineWidth = 1.5;
  ctx.strokeStyle = "#8a8aa0";
  for (const s of scene.segments) {
    ctx.beginPath();
    ctx.moveTo(s.x1, s.y1);
    ctx.lineTo(s.x2, s.y2);
    ctx.stroke();
  }

  // draw far points first so near ones sit on top
  const ordered = [...scene.points].sort((a, b) => a.depth - b.depth);
  for (const p of ordered) {
    ctx.fillStyle = p.color;
    ctx.beginPath();
    ctx.arc(p.x, p.y, 3.5, 0, Math.PI * 2);
    ctx.fill();
  }
  ctx.restore();
}
