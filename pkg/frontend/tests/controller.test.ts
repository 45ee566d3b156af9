import { beforeEach, describe, expect, it } from "vitest";

import type { AssignmentView, GroundTruthTable, SubmitResult, SurveyApi } from "../src/api.js";
import { SurveyController } from "../src/controller.js";

const TABLE: GroundTruthTable = {
  title: "T",
  headers: ["a", "b"],
  rows: [["x", "1"]],
};

class FakeApi {
  assignment: AssignmentView = {
    rater_id: "r1",
    chart_ids: ["c1", "c2"],
    completed: [],
    total: 2,
  };
  submitResults: SubmitResult[] = [];
  submissions: Array<{ chartId: string; ratings: Map<number, number> }> = [];

  chartImageUrl(chartId: string): string {
    return `/api/chart/${chartId}`;
  }

  async fetchAssignment(): Promise<AssignmentView> {
    return {
      ...this.assignment,
      chart_ids: [...this.assignment.chart_ids],
      completed: [...this.assignment.completed],
    };
  }

  async fetchTable(): Promise<GroundTruthTable> {
    return TABLE;
  }

  async submitResponse(
    _rater: string,
    chartId: string,
    ratings: ReadonlyMap<number, number>,
  ): Promise<SubmitResult> {
    this.submissions.push({ chartId, ratings: new Map(ratings) });
    return this.submitResults.shift() ?? { status: 200 };
  }
}

async function tick(times = 4): Promise<void> {
  for (let i = 0; i < times; i++) {
    await new Promise((resolve) => setTimeout(resolve, 0));
  }
}

function setup() {
  document.body.innerHTML = "";
  const container = document.createElement("div");
  document.body.appendChild(container);
  const api = new FakeApi();
  const controller = new SurveyController(
    api as unknown as SurveyApi,
    "r1",
    container,
    document,
  );
  return { api, controller, container };
}

beforeEach(() => {
  document.body.innerHTML = "";
});

describe("controller flow", () => {
  it("keyboard 1-5 fills items in order and enables submit", async () => {
    const { controller, container } = setup();
    await controller.start();
    await tick();
    expect(container.querySelector(".progress")?.textContent).toBe("Chart 1 of 2");

    const keys = ["5", "4", "4", "5", "3", "2", "4"];
    for (const key of keys) controller.handleKey(key);
    expect(controller.formState.selections.size).toBe(7);
    expect(controller.formState.selections.get(1)).toBe(5);
    expect(controller.formState.selections.get(6)).toBe(2);

    const submit = container.querySelector("button.submit-ratings") as HTMLButtonElement;
    expect(submit.disabled).toBe(false);
  });

  it("non-digit and out-of-range keys are ignored", async () => {
    const { controller } = setup();
    await controller.start();
    await tick();
    for (const key of ["0", "6", "a", "Enter", " "]) controller.handleKey(key);
    expect(controller.formState.selections.size).toBe(0);
  });

  it("successful submit advances and finally completes", async () => {
    const { api, controller, container } = setup();
    await controller.start();
    await tick();
    for (const key of ["4", "4", "4", "4", "4", "4", "4"]) controller.handleKey(key);
    await controller.submit();
    await tick();
    expect(container.querySelector(".progress")?.textContent).toBe("Chart 2 of 2");
    expect(api.submissions.length).toBe(1);
    expect(api.submissions[0]?.chartId).toBe("c1");

    for (const key of ["3", "3", "3", "3", "3", "3", "3"]) controller.handleKey(key);
    await controller.submit();
    await tick();
    expect(container.querySelector(".completion")).not.toBeNull();
    expect(api.submissions.length).toBe(2);
  });

  it("409 resyncs the cursor from the server without resubmitting", async () => {
    const { api, controller, container } = setup();
    await controller.start();
    await tick();
    for (const key of ["5", "5", "5", "5", "5", "5", "5"]) controller.handleKey(key);

    // another session already rated c1: the server will reject this one
    api.submitResults.push({ status: 409 });
    api.assignment.completed = ["c1"];
    await controller.submit();
    await tick();

    expect(container.querySelector(".progress")?.textContent).toBe("Chart 2 of 2");
    expect(api.submissions.length).toBe(1); // the rejected attempt only
  });

  it("incomplete form never submits", async () => {
    const { api, controller } = setup();
    await controller.start();
    await tick();
    controller.handleKey("4");
    await controller.submit();
    expect(api.submissions.length).toBe(0);
  });
});
