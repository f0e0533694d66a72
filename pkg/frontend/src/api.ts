/** Typed client for the decision-support service. Every number shown on
 * the dashboard comes from these responses; the client never recomputes
 * predictions or schedules locally. */

import type {
  OpPoint,
  RunDto,
  RunListDto,
  ScheduleEdit,
  StateDto,
  WhatIfDto,
} from "./types.js";

export class ApiError extends Error {
  readonly status: number;
  readonly code: string;

  constructor(status: number, code: string, message: string) {
    super(message);
    this.status = status;
    this.code = code;
  }
}

async function parseError(response: Response): Promise<ApiError> {
  try {
    const body = await response.json();
    const err = body?.error;
    if (err && typeof err.code === "string") {
      return new ApiError(response.status, err.code, err.message ?? "");
    }
  } catch {
    // fall through to the generic error
  }
  return new ApiError(response.status, "unknown", `HTTP ${response.status}`);
}

export class ApiClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchFn: typeof fetch = fetch,
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchFn(`${this.baseUrl}${path}`, init);
    if (!response.ok) {
      throw await parseError(response);
    }
    return (await response.json()) as T;
  }

  getState(): Promise<StateDto> {
    return this.request<StateDto>("/api/v1/state");
  }

  whatIf(opPoint: OpPoint): Promise<WhatIfDto> {
    return this.request<WhatIfDto>("/api/v1/whatif", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ op_point: opPoint }),
    });
  }

  plan(horizonSteps: number): Promise<unknown> {
    return this.request("/api/v1/plan", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ horizon_steps: horizonSteps }),
    });
  }

  operatorAction(
    runId: number,
    kind: "accept" | "override",
    edits?: ScheduleEdit[],
    opPoint?: OpPoint,
  ): Promise<RunDto> {
    const body: Record<string, unknown> = { run_id: runId, kind };
    if (edits && edits.length) {
      body.schedule_edits = edits;
    }
    if (kind === "override" && opPoint) {
      body.op_point = opPoint;
    }
    return this.request<RunDto>("/api/v1/operator/action", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
  }

  listRuns(limit: number, offset: number): Promise<RunListDto> {
    return this.request<RunListDto>(`/api/v1/runs?limit=${limit}&offset=${offset}`);
  }

  tick(steps: number): Promise<unknown> {
    return this.request("/api/v1/sim/tick", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ steps }),
    });
  }
}
