// In-memory annotation document backing one canvas. Holds the scene image
// reference, the strokes and labels drawn so far, and an undo stack of
// snapshots. Serialization goes through the same instruction schema the
// service parses, so whatever round-trips here is exactly what gets posted.

import { decimate } from "./decimate";
import { SCHEMA_VERSION } from "./types";
import type { InstructionDoc, Point2, Stroke, StrokeKind, StrokeStyle, TextLabel } from "./types";

export interface ValidationIssue {
  target: "stroke" | "label" | "document";
  index: number;
  message: string;
}

interface Snapshot {
  strokes: Stroke[];
  labels: TextLabel[];
}

function cloneStroke(s: Stroke): Stroke {
  return {
    kind: s.kind,
    points: s.points.map((p) => [p[0], p[1]] as Point2),
    style: { rgba: [...s.style.rgba] as StrokeStyle["rgba"], width: s.style.width },
  };
}

function cloneLabel(l: TextLabel): TextLabel {
  return { text: l.text, anchor: [l.anchor[0], l.anchor[1]] };
}

const STROKE_KINDS: StrokeKind[] = ["freehand", "arrow", "boundary"];

export class CanvasDocument {
  imageRef: string;
  strokes: Stroke[] = [];
  labels: TextLabel[] = [];
  decimationTolerance: number;

  private undoStack: Snapshot[] = [];
  private redoStack: Snapshot[] = [];

  constructor(imageRef: string, decimationTolerance = 0.5) {
    this.imageRef = imageRef;
    this.decimationTolerance = decimationTolerance;
  }

  private snapshot(): Snapshot {
    return {
      strokes: this.strokes.map(cloneStroke),
      labels: this.labels.map(cloneLabel),
    };
  }

  private push(): void {
    this.undoStack.push(this.snapshot());
    this.redoStack = [];
  }

  /** Add a stroke from raw pointer samples, thinned before storage. */
  addStroke(kind: StrokeKind, rawPoints: Point2[], style: StrokeStyle): Stroke {
    this.push();
    const stroke: Stroke = {
      kind,
      points: decimate(rawPoints, this.decimationTolerance),
      style: { rgba: [...style.rgba] as StrokeStyle["rgba"], width: style.width },
    };
    this.strokes.push(stroke);
    return stroke;
  }

  addLabel(text: string, anchor: Point2): TextLabel {
    this.push();
    const label: TextLabel = { text, anchor: [anchor[0], anchor[1]] };
    this.labels.push(label);
    return label;
  }

  canUndo(): boolean {
    return this.undoStack.length > 0;
  }

  canRedo(): boolean {
    return this.redoStack.length > 0;
  }

  undo(): boolean {
    const prev = this.undoStack.pop();
    if (!prev) return false;
    this.redoStack.push(this.snapshot());
    this.strokes = prev.strokes;
    this.labels = prev.labels;
    return true;
  }

  redo(): boolean {
    const next = this.redoStack.pop();
    if (!next) return false;
    this.undoStack.push(this.snapshot());
    this.strokes = next.strokes;
    this.labels = next.labels;
    return true;
  }

  clear(): void {
    if (this.strokes.length === 0 && this.labels.length === 0) return;
    this.push();
    this.strokes = [];
    this.labels = [];
  }

  isEmpty(): boolean {
    return this.strokes.length === 0 && this.labels.length === 0;
  }

  /** An instruction needs at least one annotation before it may be posted. */
  canSubmit(): boolean {
    return !this.isEmpty() && this.validate().length === 0;
  }

  /**
   * Client-side mirror of the service's instruction checks, so problems are
   * flagged at the offending stroke or label before a request goes out.
   */
  validate(): ValidationIssue[] {
    const issues: ValidationIssue[] = [];
    if (this.isEmpty()) {
      issues.push({ target: "document", index: -1, message: "draw at least one stroke or label" });
    }
    this.strokes.forEach((s, i) => {
      if (!STROKE_KINDS.includes(s.kind)) {
        issues.push({ target: "stroke", index: i, message: `unknown stroke kind ${s.kind}` });
      }
      if (s.points.length < 2) {
        issues.push({ target: "stroke", index: i, message: "stroke needs at least 2 points" });
      }
      for (const p of s.points) {
        if (!Number.isFinite(p[0]) || !Number.isFinite(p[1]) || p[0] < 0 || p[1] < 0) {
          issues.push({ target: "stroke", index: i, message: "points must be finite and non-negative" });
          break;
        }
      }
      const rgba = s.style.rgba;
      if (rgba.length !== 4 || rgba.some((c) => !Number.isInteger(c) || c < 0 || c > 255)) {
        issues.push({ target: "stroke", index: i, message: "rgba must be 4 integers in 0..255" });
      }
      if (!(s.style.width > 0)) {
        issues.push({ target: "stroke", index: i, message: "stroke width must be positive" });
      }
    });
    this.labels.forEach((l, i) => {
      if (l.text.trim().length === 0) {
        issues.push({ target: "label", index: i, message: "label text must not be empty" });
      }
      if (!Number.isFinite(l.anchor[0]) || !Number.isFinite(l.anchor[1]) || l.anchor[0] < 0 || l.anchor[1] < 0) {
        issues.push({ target: "label", index: i, message: "anchor must be finite and non-negative" });
      }
    });
    return issues;
  }

  toInstruction(): InstructionDoc {
    return {
      version: SCHEMA_VERSION,
      image_ref: this.imageRef,
      strokes: this.strokes.map(cloneStroke),
      labels: this.labels.map(cloneLabel),
    };
  }

  serialize(): string {
    return JSON.stringify(this.toInstruction());
  }

  static fromInstruction(doc: InstructionDoc): CanvasDocument {
    if (doc.version !== SCHEMA_VERSION) {
      throw new Error(`unsupported instruction version ${doc.version}`);
    }
    const out = new CanvasDocument(doc.image_ref);
    out.strokes = doc.strokes.map(cloneStroke);
    out.labels = doc.labels.map(cloneLabel);
    return out;
  }
}

/**
 * Pin a server-side rejection onto a stroke or label. The service reports a
 * field path but no index, so we locate the first item our own checks also
 * flag; if none match, the message lands on the document.
 */
export function issueFromServerError(
  detail: { message: string; field?: string },
  doc: CanvasDocument,
): ValidationIssue {
  const field = detail.field ?? "";
  const local = doc.validate();
  if (field.startsWith("stroke") || field.startsWith("style")) {
    const hit = local.find((i) => i.target === "stroke");
    return { target: "stroke", index: hit ? hit.index : 0, message: detail.message };
  }
  if (field.startsWith("label")) {
    const hit = local.find((i) => i.target === "label");
    return { target: "label", index: hit ? hit.index : 0, message: detail.message };
  }
  return { target: "document", index: -1, message: detail.message };
}
