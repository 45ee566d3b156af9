// Thin typed client over the survey backend's JSON API. The client never
// sees model or strategy names: chart ids are opaque and the assignment
// endpoint withholds conditions by design.

export interface AssignmentView {
  rater_id: string;
  chart_ids: string[];
  completed: string[];
  total: number;
}

export interface GroundTruthTable {
  title: string;
  headers: string[];
  rows: string[][];
}

export interface SubmitResult {
  status: number;
  completed?: number;
  total?: number;
  detail?: string;
}

export class ApiError extends Error {
  constructor(readonly status: number, message: string) {
    super(message);
  }
}

export class SurveyApi {
  constructor(private readonly base: string = "") {}

  chartImageUrl(chartId: string): string {
    return `${this.base}/api/chart/${chartId}`;
  }

  async fetchAssignment(raterId: string): Promise<AssignmentView> {
    const resp = await fetch(`${this.base}/api/assignment/${raterId}`);
    if (!resp.ok) {
      throw new ApiError(resp.status, `assignment fetch failed (${resp.status})`);
    }
    return (await resp.json()) as AssignmentView;
  }

  async fetchTable(chartId: string): Promise<GroundTruthTable> {
    const resp = await fetch(`${this.base}/api/chart/${chartId}/table`);
    if (!resp.ok) {
      throw new ApiError(resp.status, `table fetch failed (${resp.status})`);
    }
    return (await resp.json()) as GroundTruthTable;
  }

  async submitResponse(
    raterId: string,
    chartId: string,
    ratings: ReadonlyMap<number, number>,
  ): Promise<SubmitResult> {
    const body = {
      rater_id: raterId,
      chart_id: chartId,
      ratings: Object.fromEntries(
        [...ratings.entries()].map(([k, v]) => [String(k), v]),
      ),
    };
    const resp = await fetch(`${this.base}/api/response`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
    const payload = (await resp.json().catch(() => ({}))) as Record<string, unknown>;
    return {
      status: resp.status, // HTTP status; the body's own "status" field is dropped
      completed: typeof payload["completed"] === "number" ? payload["completed"] : undefined,
      total: typeof payload["total"] === "number" ? payload["total"] : undefined,
      detail: typeof payload["detail"] === "string" ? payload["detail"] : undefined,
    };
  }
}
