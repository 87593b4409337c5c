// App shell: wires the annotation canvas, the submit flow, and the
// inspection panels to the planning service. All geometry and wire-format
// logic lives in the sibling modules; this file is DOM plumbing.

import { ServiceClient, ServiceError } from "./api";
import { CanvasDocument, issueFromServerError } from "./document";
import type { ValidationIssue } from "./document";
import { parseCalibration } from "./geometry";
import type { OrbitCamera } from "./geometry";
import { buildOrbitScene, buildViewOverlay } from "./scene";
import { drawLabel, drawOrbitScene, drawStroke, drawViewOverlayScene, rgbaToCss } from "./draw";
import type { Overlays, PlanDoc, Point2, StrokeKind, StrokeStyle, ViewDoc } from "./types";

const client = new ServiceClient("");

function $<T extends HTMLElement>(id: string): T {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el as T;
}

const els = {
  health: $("health"),
  sceneStatus: $("scene-status"),
  image1: $<HTMLInputElement>("image1"),
  image2: $<HTMLInputElement>("image2"),
  calibration: $<HTMLInputElement>("calibration"),
  uploadScene: $<HTMLButtonElement>("upload-scene"),
  annotateSection: $("annotate-section"),
  tool: $<HTMLSelectElement>("tool"),
  strokeColor: $<HTMLInputElement>("stroke-color"),
  strokeWidth: $<HTMLInputElement>("stroke-width"),
  labelText: $<HTMLInputElement>("label-text"),
  undo: $<HTMLButtonElement>("undo"),
  redo: $<HTMLButtonElement>("redo"),
  clear: $<HTMLButtonElement>("clear"),
  canvas: $<HTMLCanvasElement>("annotate-canvas"),
  issues: $<HTMLUListElement>("issues"),
  backend: $<HTMLInputElement>("backend"),
  configJson: $<HTMLInputElement>("config-json"),
  submit: $<HTMLButtonElement>("submit"),
  submitStatus: $("submit-status"),
  inspectSection: $("inspect-section"),
  overlayViews: $("overlay-views"),
  ellipsoids: $<HTMLInputElement>("ellipsoids"),
  sampleN: $<HTMLInputElement>("sample-n"),
  sampleSeed: $<HTMLInputElement>("sample-seed"),
  sample: $<HTMLButtonElement>("sample"),
  inspectStatus: $("inspect-status"),
  orbitCanvas: $<HTMLCanvasElement>("orbit-canvas"),
};

interface SceneState {
  sceneId: string;
  views: ViewDoc[];
  images: HTMLImageElement[]; // same order as views, local object URLs
}

let scene: SceneState | null = null;
let doc: CanvasDocument | null = null;
let pending: Point2[] = [];
let highlight: ValidationIssue | null = null;

let planId: string | null = null;
let plan: PlanDoc | null = null;
let overlays: Overlays | null = null;
let samples: number[][][] | null = null;
let orbitCam: OrbitCamera = { yaw: 0.7, pitch: 0.5, zoom: 200, target: [0, 0, 1] };

// ---- service health -------------------------------------------------------

client
  .health()
  .then((h) => {
    els.health.textContent = `service ok (${h.version})`;
    els.health.className = "ok";
  })
  .catch(() => {
    els.health.textContent = "service unreachable";
    els.health.className = "error";
  });

// ---- scene upload ---------------------------------------------------------

function loadImage(file: File): Promise<HTMLImageElement> {
  return new Promise((resolve, reject) => {
    const img = new Image();
    img.onload = () => resolve(img);
    img.onerror = () => reject(new Error(`cannot decode ${file.name}`));
    img.src = URL.createObjectURL(file);
  });
}

els.uploadScene.addEventListener("click", async () => {
  const f1 = els.image1.files?.[0];
  const f2 = els.image2.files?.[0];
  const fc = els.calibration.files?.[0];
  if (!f1 || !f2 || !fc) {
    els.sceneStatus.textContent = "choose both view images and the calibration file first";
    els.sceneStatus.className = "error";
    return;
  }
  els.uploadScene.disabled = true;
  els.sceneStatus.textContent = "uploading…";
  els.sceneStatus.className = "muted";
  try {
    const views = parseCalibration(await fc.text());
    if (views.length !== 2) throw new Error(`calibration must define exactly 2 views, got ${views.length}`);
    const [img1, img2] = await Promise.all([loadImage(f1), loadImage(f2)]);
    const sceneId = await client.uploadScene(f1, f2, fc);
    scene = { sceneId, views, images: [img1, img2] };
    doc = new CanvasDocument(views[0].id);
    resetPlanState();
    els.sceneStatus.textContent = `scene ${sceneId.slice(0, 12)}… uploaded; annotating view "${views[0].id}"`;
    els.sceneStatus.className = "ok";
    els.annotateSection.classList.remove("hidden");
    sizeAnnotateCanvas();
    redrawAnnotation();
    refreshControls();
  } catch (e) {
    els.sceneStatus.textContent = e instanceof Error ? e.message : String(e);
    els.sceneStatus.className = "error";
  } finally {
    els.uploadScene.disabled = false;
  }
});

// ---- annotation canvas ----------------------------------------------------

function sizeAnnotateCanvas() {
  if (!scene) return;
  const img = scene.images[0];
  els.canvas.width = img.naturalWidth;
  els.canvas.height = img.naturalHeight;
}

function currentStyle(): StrokeStyle {
  const hex = els.strokeColor.value;
  const r = parseInt(hex.slice(1, 3), 16);
  const g = parseInt(hex.slice(3, 5), 16);
  const b = parseInt(hex.slice(5, 7), 16);
  const width = Math.max(1, Number(els.strokeWidth.value) || 1);
  return { rgba: [r, g, b, 255], width };
}

function canvasPoint(ev: PointerEvent): Point2 {
  const rect = els.canvas.getBoundingClientRect();
  const sx = els.canvas.width / rect.width;
  const sy = els.canvas.height / rect.height;
  // clamp into the image so serialized points stay non-negative
  const x = Math.min(Math.max(0, (ev.clientX - rect.left) * sx), els.canvas.width);
  const y = Math.min(Math.max(0, (ev.clientY - rect.top) * sy), els.canvas.height);
  return [x, y];
}

function redrawAnnotation() {
  const ctx = els.canvas.getContext("2d");
  if (!ctx || !scene) return;
  ctx.clearRect(0, 0, els.canvas.width, els.canvas.height);
  ctx.drawImage(scene.images[0], 0, 0);
  if (!doc) return;
  doc.strokes.forEach((s, i) => {
    const hot = highlight && highlight.target === "stroke" && highlight.index === i;
    if (hot) {
      ctx.save();
      ctx.shadowColor = "#ff3050";
      ctx.shadowBlur = 10;
      drawStroke(ctx, s);
      ctx.restore();
    } else {
      drawStroke(ctx, s);
    }
  });
  doc.labels.forEach((l, i) => {
    const hot = highlight !== null && highlight.target === "label" && highlight.index === i;
    drawLabel(ctx, l, hot);
  });
  if (pending.length > 1) {
    drawStroke(ctx, { kind: els.tool.value as StrokeKind, points: pending, style: currentStyle() });
  }
}

let drawing = false;

els.canvas.addEventListener("pointerdown", (ev) => {
  if (!doc) return;
  const tool = els.tool.value;
  if (tool === "label") {
    const text = els.labelText.value.trim();
    if (!text) {
      setIssues([{ target: "label", index: -1, message: "type the label text before placing it" }]);
      return;
    }
    doc.addLabel(text, canvasPoint(ev));
    onDocumentEdited();
    return;
  }
  drawing = true;
  pending = [canvasPoint(ev)];
  els.canvas.setPointerCapture(ev.pointerId);
});

els.canvas.addEventListener("pointermove", (ev) => {
  if (!drawing || !doc) return;
  // coalesced events carry the full pointer resolution between frames
  const batch = typeof ev.getCoalescedEvents === "function" ? ev.getCoalescedEvents() : [];
  if (batch.length > 0) {
    for (const sub of batch) pending.push(canvasPoint(sub));
  } else {
    pending.push(canvasPoint(ev));
  }
  redrawAnnotation();
});

els.canvas.addEventListener("pointerup", (ev) => {
  if (!drawing || !doc) return;
  drawing = false;
  pending.push(canvasPoint(ev));
  if (pending.length >= 2) {
    doc.addStroke(els.tool.value as StrokeKind, pending, currentStyle());
  }
  pending = [];
  onDocumentEdited();
});

els.canvas.addEventListener("pointercancel", () => {
  drawing = false;
  pending = [];
  redrawAnnotation();
});

els.undo.addEventListener("click", () => {
  if (doc?.undo()) onDocumentEdited();
});
els.redo.addEventListener("click", () => {
  if (doc?.redo()) onDocumentEdited();
});
els.clear.addEventListener("click", () => {
  doc?.clear();
  onDocumentEdited();
});

function refreshControls() {
  els.undo.disabled = !doc?.canUndo();
  els.redo.disabled = !doc?.canRedo();
}

function onDocumentEdited() {
  highlight = null;
  // edits invalidate the shown plan; the next submit creates a fresh
  // instruction and plan rather than touching the old ones
  if (planId) resetPlanState();
  setIssues(doc && !doc.isEmpty() ? doc.validate() : []);
  refreshControls();
  redrawAnnotation();
}

function setIssues(issues: ValidationIssue[]) {
  els.issues.innerHTML = "";
  for (const issue of issues) {
    const li = document.createElement("li");
    const where =
      issue.target === "document" || issue.index < 0 ? "" : ` (${issue.target} ${issue.index + 1})`;
    li.textContent = issue.message + where;
    li.addEventListener("click", () => {
      highlight = issue;
      redrawAnnotation();
    });
    els.issues.appendChild(li);
  }
}

// ---- submit flow ----------------------------------------------------------

function resetPlanState() {
  planId = null;
  plan = null;
  overlays = null;
  samples = null;
  els.inspectSection.classList.add("hidden");
  els.submitStatus.textContent = "";
  els.submitStatus.className = "muted";
}

els.submit.addEventListener("click", async () => {
  if (!scene || !doc) return;
  if (doc.isEmpty()) {
    els.submitStatus.textContent = "nothing to submit: draw at least one stroke or label";
    els.submitStatus.className = "error";
    return;
  }
  const issues = doc.validate();
  if (issues.length > 0) {
    setIssues(issues);
    els.submitStatus.textContent = "fix the flagged annotations before submitting";
    els.submitStatus.className = "error";
    return;
  }
  let config: Record<string, unknown> | undefined;
  const rawConfig = els.configJson.value.trim();
  if (rawConfig) {
    try {
      config = JSON.parse(rawConfig);
    } catch {
      els.submitStatus.textContent = "config must be valid JSON";
      els.submitStatus.className = "error";
      return;
    }
  }
  els.submit.disabled = true;
  els.submitStatus.className = "muted";
  try {
    els.submitStatus.textContent = "posting instruction…";
    const instructionId = await client.postInstruction(doc.toInstruction());
    els.submitStatus.textContent = "requesting plan…";
    const submitted = await client.submitPlan(instructionId, scene.sceneId, {
      backend: els.backend.value.trim() || undefined,
      config,
    });
    planId = submitted.planId;
    els.submitStatus.textContent = `plan ${planId.slice(0, 12)}… ${submitted.alreadyDone ? "already done" : "running"}`;
    const result = await client.pollPlan(planId);
    if (result.status === "missing") {
      els.submitStatus.textContent = "plan disappeared from the server; submit again to recreate it";
      els.submitStatus.className = "error";
      return;
    }
    const status = result.doc;
    if (status.status === "failed") {
      const detail = status.error ?? { message: "plan failed" };
      if (detail.field) setIssues([issueFromServerError(detail, doc)]);
      els.submitStatus.textContent = `plan failed: ${detail.message}`;
      els.submitStatus.className = "error";
      return;
    }
    if (status.status !== "done" || !status.plan || !status.overlays) {
      els.submitStatus.textContent = `plan still ${status.status}; try again shortly`;
      return;
    }
    plan = status.plan;
    overlays = status.overlays;
    samples = null;
    els.submitStatus.textContent = `plan done: horizon ${plan.horizon}, ${status.trace?.length ?? 0} pipeline stages`;
    els.submitStatus.className = "ok";
    showInspection();
  } catch (e) {
    if (e instanceof ServiceError && e.detail.field && doc) {
      setIssues([issueFromServerError(e.detail, doc)]);
      redrawAnnotation();
    }
    els.submitStatus.textContent = e instanceof Error ? e.message : String(e);
    els.submitStatus.className = "error";
  } finally {
    els.submit.disabled = false;
  }
});

// ---- inspection -----------------------------------------------------------

function fitOrbitToPlan(p: PlanDoc) {
  const pts = p.distribution.waypoints.map((w) => w.mu);
  if (pts.length === 0) return;
  const c: [number, number, number] = [0, 0, 0];
  for (const m of pts) {
    c[0] += m[0] / pts.length;
    c[1] += m[1] / pts.length;
    c[2] += m[2] / pts.length;
  }
  let extent = 0;
  for (const m of pts) {
    extent = Math.max(extent, Math.hypot(m[0] - c[0], m[1] - c[1], m[2] - c[2]));
  }
  orbitCam = {
    yaw: 0.7,
    pitch: 0.5,
    zoom: extent > 1e-9 ? (0.35 * Math.min(els.orbitCanvas.width, els.orbitCanvas.height)) / extent : 200,
    target: c,
  };
}

function showInspection() {
  if (!scene || !plan || !overlays) return;
  els.inspectSection.classList.remove("hidden");
  els.overlayViews.innerHTML = "";
  scene.views.forEach((view, idx) => {
    const fig = document.createElement("figure");
    const cv = document.createElement("canvas");
    const img = scene!.images[idx];
    cv.width = img.naturalWidth;
    cv.height = img.naturalHeight;
    const ctx = cv.getContext("2d");
    if (ctx) {
      ctx.drawImage(img, 0, 0);
      drawViewOverlayScene(ctx, buildViewOverlay(view.id, overlays!, plan, scene!.views));
    }
    const cap = document.createElement("figcaption");
    const pointed = overlays![view.id]?.pointed.length ?? 0;
    cap.textContent = `${view.id}: sketch path, planned trajectory, ${pointed} keypoints`;
    fig.appendChild(cv);
    fig.appendChild(cap);
    els.overlayViews.appendChild(fig);
  });
  fitOrbitToPlan(plan);
  redrawOrbit();
}

function redrawOrbit() {
  if (!plan) return;
  const ctx = els.orbitCanvas.getContext("2d");
  if (!ctx) return;
  const sceneGraph = buildOrbitScene(plan, orbitCam, {
    showEllipsoids: els.ellipsoids.checked,
    samples: samples ?? undefined,
  });
  drawOrbitScene(ctx, sceneGraph, els.orbitCanvas.width, els.orbitCanvas.height);
}

let orbiting = false;
let lastOrbit: Point2 = [0, 0];

els.orbitCanvas.addEventListener("pointerdown", (ev) => {
  orbiting = true;
  lastOrbit = [ev.clientX, ev.clientY];
  els.orbitCanvas.setPointerCapture(ev.pointerId);
});
els.orbitCanvas.addEventListener("pointermove", (ev) => {
  if (!orbiting) return;
  orbitCam.yaw += (ev.clientX - lastOrbit[0]) * 0.01;
  orbitCam.pitch = Math.min(1.5, Math.max(-1.5, orbitCam.pitch + (ev.clientY - lastOrbit[1]) * 0.01));
  lastOrbit = [ev.clientX, ev.clientY];
  redrawOrbit();
});
els.orbitCanvas.addEventListener("pointerup", () => {
  orbiting = false;
});
els.orbitCanvas.addEventListener("wheel", (ev) => {
  ev.preventDefault();
  orbitCam.zoom *= ev.deltaY < 0 ? 1.12 : 1 / 1.12;
  redrawOrbit();
});

els.ellipsoids.addEventListener("change", redrawOrbit);

els.sample.addEventListener("click", async () => {
  if (!planId) return;
  const n = Math.max(1, Number(els.sampleN.value) || 5);
  const seed = Number(els.sampleSeed.value) || 0;
  els.sample.disabled = true;
  els.inspectStatus.textContent = "sampling…";
  els.inspectStatus.className = "muted";
  try {
    const res = await client.samplePlan(planId, n, seed);
    samples = res.samples;
    els.inspectStatus.textContent = `${res.n} samples, seed ${res.seed}`;
    redrawOrbit();
  } catch (e) {
    if (e instanceof ServiceError && e.status === 404) {
      // the plan id went stale (service data was cleared); offer a redo
      els.inspectStatus.textContent = "plan no longer on the server — resubmit to recreate it";
      els.inspectStatus.className = "error";
      resetPlanState();
      els.submitStatus.textContent = "press Submit plan to recreate the stale plan";
      els.submitStatus.className = "error";
    } else {
      els.inspectStatus.textContent = e instanceof Error ? e.message : String(e);
      els.inspectStatus.className = "error";
    }
  } finally {
    els.sample.disabled = false;
  }
});

// expose a couple of hooks for quick console poking during development
declare global {
  interface Window {
    sketchmotion?: { client: ServiceClient; rgbaToCss: typeof rgbaToCss };
  }
}
window.sketchmotion = { client, rgbaToCss };
