// Wire formats shared with the planning service. These mirror the JSON the
// service reads and writes; the UI never invents fields of its own.

export type Point2 = [number, number];
export type Point3 = [number, number, number];

export const SCHEMA_VERSION = "crossinstruct/1";

export type StrokeKind = "freehand" | "arrow" | "boundary";

export interface StrokeStyle {
  rgba: [number, number, number, number];
  width: number;
}

export interface Stroke {
  kind: StrokeKind;
  points: Point2[];
  style: StrokeStyle;
}

export interface TextLabel {
  text: string;
  anchor: Point2;
}

export interface InstructionDoc {
  version: string;
  image_ref: string;
  strokes: Stroke[];
  labels: TextLabel[];
}

export interface IntrinsicsDoc {
  fx: number;
  fy: number;
  cx: number;
  cy: number;
  width: number;
  height: number;
}

export interface PoseDoc {
  rotation: number[]; // 9 values, row major, world-from-camera
  translation: number[]; // camera center in world coordinates
}

export interface ViewDoc {
  id: string;
  intrinsics: IntrinsicsDoc;
  pose: PoseDoc;
}

export interface PlanStep {
  t: number;
  position: Point3;
  quaternion: [number, number, number, number];
  gripper: number;
}

export interface WaypointDoc {
  t: number;
  mu: Point3;
  sigma: number[]; // 3x3 row major
  n_samples: number;
}

export interface DistributionDoc {
  horizon: number;
  waypoints: WaypointDoc[];
}

export interface PlanDoc {
  horizon: number;
  steps: PlanStep[];
  distribution: DistributionDoc;
  provenance: Record<string, unknown>;
}

export interface PointedDoc {
  descriptor_index: number;
  view_id: string;
  pixel: Point2;
}

export interface ViewOverlay {
  trajectory: Point2[];
  pointed: PointedDoc[];
  raw_polyline?: Point2[];
}

export type Overlays = Record<string, ViewOverlay>;

export interface TraceRecord {
  stage: string;
  started_at: string;
  input_digest: string;
  output_digest: string;
  diagnostics: Record<string, unknown>;
}

export type PlanStatus = "queued" | "running" | "done" | "failed";

export interface PlanStatusDoc {
  plan_id: string;
  status: PlanStatus;
  created_at?: string;
  plan?: PlanDoc;
  overlays?: Overlays;
  trace?: TraceRecord[];
  error?: ServerError;
}

export interface SamplesDoc {
  plan_id: string;
  n: number;
  seed: number;
  samples: number[][][]; // n trajectories, horizon points, xyz
}

export interface ServerError {
  type?: string;
  message: string;
  field?: string;
  [extra: string]: unknown;
}
