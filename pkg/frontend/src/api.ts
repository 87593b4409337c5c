// Thin HTTP client over the planning service. Every request and response
// here is one of the documented wire formats; nothing UI-specific crosses
// the boundary.

import type { InstructionDoc, PlanStatusDoc, SamplesDoc, ServerError } from "./types";

export class ServiceError extends Error {
  status: number;
  detail: ServerError;

  constructor(status: number, detail: ServerError) {
    super(detail.message);
    this.name = "ServiceError";
    this.status = status;
    this.detail = detail;
  }
}

export interface PlanSubmitResult {
  planId: string;
  statusUrl: string;
  alreadyDone: boolean;
}

export type PlanLookup = { status: "missing" } | { status: "found"; doc: PlanStatusDoc };

type FetchFn = typeof fetch;

async function errorDetail(res: Response): Promise<ServerError> {
  try {
    const body = await res.json();
    if (body && typeof body === "object" && body.error && typeof body.error.message === "string") {
      return body.error as ServerError;
    }
  } catch {
    // fall through to the generic message
  }
  return { message: `request failed with status ${res.status}` };
}

export class ServiceClient {
  baseUrl: string;
  private fetchFn: FetchFn;

  constructor(baseUrl = "", fetchFn: FetchFn = fetch) {
    this.baseUrl = baseUrl.replace(/\/$/, "");
    this.fetchFn = fetchFn;
  }

  private url(path: string): string {
    return this.baseUrl + path;
  }

  async health(): Promise<{ status: string; version: string }> {
    const res = await this.fetchFn(this.url("/healthz"));
    if (!res.ok) throw new ServiceError(res.status, await errorDetail(res));
    return res.json();
  }

  /** Upload both view images plus the calibration file, returning the scene id. */
  async uploadScene(image1: Blob, image2: Blob, calibration: Blob): Promise<string> {
    const form = new FormData();
    form.append("image1", image1, "view1.png");
    form.append("image2", image2, "view2.png");
    form.append("calibration", calibration, "calibration.json");
    const res = await this.fetchFn(this.url("/api/v1/scenes"), { method: "POST", body: form });
    if (!res.ok) throw new ServiceError(res.status, await errorDetail(res));
    const body = await res.json();
    return body.scene_id;
  }

  /** Post a serialized instruction document, returning its id. */
  async postInstruction(doc: InstructionDoc): Promise<string> {
    const res = await this.fetchFn(this.url("/api/v1/instructions"), {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(doc),
    });
    if (!res.ok) throw new ServiceError(res.status, await errorDetail(res));
    const body = await res.json();
    return body.instruction_id;
  }

  /**
   * Ask the service to plan. 202 means accepted, 200 means the identical
   * request already finished, 409 means it is still running; all three carry
   * the plan id, so each maps to a normal result.
   */
  async submitPlan(
    instructionId: string,
    sceneId: string,
    options: { backend?: string; config?: Record<string, unknown> } = {},
  ): Promise<PlanSubmitResult> {
    const payload: Record<string, unknown> = {
      instruction_id: instructionId,
      scene_id: sceneId,
    };
    if (options.backend) payload.backend = options.backend;
    if (options.config) payload.config = options.config;
    const res = await this.fetchFn(this.url("/api/v1/plans"), {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(payload),
    });
    if (res.status === 202 || res.status === 200 || res.status === 409) {
      const body = await res.json();
      return {
        planId: body.plan_id,
        statusUrl: body.status_url,
        alreadyDone: res.status === 200,
      };
    }
    throw new ServiceError(res.status, await errorDetail(res));
  }

  /** Fetch plan status. A 404 is reported as missing rather than thrown, so the UI can offer a refetch. */
  async getPlan(planId: string): Promise<PlanLookup> {
    const res = await this.fetchFn(this.url(`/api/v1/plans/${planId}`));
    if (res.status === 404) return { status: "missing" };
    const doc = (await res.json()) as PlanStatusDoc;
    // failed plans may come back 502 when the backend transport broke; the
    // body still carries the session state
    if (!res.ok && !(res.status === 502 && doc.status === "failed")) {
      throw new ServiceError(res.status, await errorDetail(res));
    }
    return { status: "found", doc };
  }

  /** Poll until the plan leaves the running state or disappears. */
  async pollPlan(
    planId: string,
    opts: { intervalMs?: number; maxAttempts?: number; sleep?: (ms: number) => Promise<void> } = {},
  ): Promise<PlanLookup> {
    const intervalMs = opts.intervalMs ?? 500;
    const maxAttempts = opts.maxAttempts ?? 240;
    const sleep = opts.sleep ?? ((ms: number) => new Promise((r) => setTimeout(r, ms)));
    let last: PlanLookup = { status: "missing" };
    for (let i = 0; i < maxAttempts; i++) {
      last = await this.getPlan(planId);
      if (last.status === "missing") return last;
      if (last.doc.status === "done" || last.doc.status === "failed") return last;
      await sleep(intervalMs);
    }
    return last;
  }

  /** Draw n trajectory samples from a finished plan's distribution. */
  async samplePlan(planId: string, n: number, seed: number): Promise<SamplesDoc> {
    const res = await this.fetchFn(this.url(`/api/v1/plans/${planId}/samples`), {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ n, seed }),
    });
    if (!res.ok) throw new ServiceError(res.status, await errorDetail(res));
    return res.json();
  }
}
