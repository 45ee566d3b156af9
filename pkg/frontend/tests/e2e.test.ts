// Scripted session against a real surveycore backend on the fixture
// corpus: complete a 3-chart assignment through the DOM, verify the stats
// endpoint returns the hand-computed item means, and exercise the
// duplicate-submission resync. Skips when the backend cannot be started.

import { spawn, spawnSync, type ChildProcess } from "node:child_process";
import { mkdtempSync } from "node:fs";
import { tmpdir } from "node:os";
import * as path from "node:path";
import { fileURLToPath } from "node:url";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { SurveyApi } from "../src/api.js";
import { SurveyController } from "../src/controller.js";

const REPO_ROOT = path.resolve(path.dirname(fileURLToPath(import.meta.url)), "../..");
const SERVER_SCRIPT = path.join(REPO_ROOT, "scripts", "serve_survey_fixture.py");

const backendAvailable = (() => {
  const probe = spawnSync("python3", ["-c", "import chartbench, uvicorn"], {
    cwd: REPO_ROOT,
  });
  return probe.status === 0;
})();

const PORT = 8800 + (process.pid % 800);
const BASE = `http://127.0.0.1:${PORT}`;
const CONDITION = "mock-gen__zero_shot";

let server: ChildProcess | null = null;

async function waitFor(
  predicate: () => boolean | Promise<boolean>,
  timeoutMs = 20_000,
  message = "condition",
): Promise<void> {
  const start = Date.now();
  for (;;) {
    if (await predicate()) return;
    if (Date.now() - start > timeoutMs) throw new Error(`timeout waiting for ${message}`);
    await new Promise((resolve) => setTimeout(resolve, 50));
  }
}

async function serverUp(): Promise<boolean> {
  try {
    const resp = await fetch(`${BASE}/api/assignment/r1`);
    return resp.ok;
  } catch {
    return false;
  }
}

beforeAll(async () => {
  if (!backendAvailable) return;
  // the simulated page lives at the backend origin, as it would when the
  // backend serves the built UI; otherwise happy-dom blocks cross-origin
  (window as unknown as { happyDOM: { setURL(url: string): void } }).happyDOM.setURL(
    BASE,
  );
  const stateDir = mkdtempSync(path.join(tmpdir(), "survey-e2e-"));
  server = spawn(
    "python3",
    [SERVER_SCRIPT, "--port", String(PORT), "--state-dir", stateDir],
    { cwd: REPO_ROOT, stdio: "ignore" },
  );
  await waitFor(serverUp, 30_000, "survey backend");
});

afterAll(() => {
  server?.kill();
});

function mountApp(): HTMLElement {
  document.body.innerHTML = "";
  const container = document.createElement("div");
  container.id = "app";
  document.body.appendChild(container);
  return container;
}

function clickRating(container: HTMLElement, itemId: number, value: number): void {
  const radio = container.querySelector(
    `fieldset[data-item-id="${itemId}"] input[value="${value}"]`,
  ) as HTMLInputElement | null;
  if (!radio) throw new Error(`no radio for item ${itemId} value ${value}`);
  radio.click();
}

async function rateCurrentChart(
  container: HTMLElement,
  ratings: Record<number, number>,
): Promise<void> {
  for (const [item, value] of Object.entries(ratings)) {
    clickRating(container, Number(item), value);
  }
  await waitFor(() => {
    const button = container.querySelector(
      "button.submit-ratings",
    ) as HTMLButtonElement | null;
    return button !== null && !button.disabled;
  });
  const submit = container.querySelector(
    "button.submit-ratings",
  ) as HTMLButtonElement;
  expect(submit.disabled).toBe(false);
  submit.click();
}

const RATINGS: Record<number, number>[] = [
  { 1: 5, 2: 4, 3: 4, 4: 5, 5: 3, 6: 2, 7: 4 },
  { 1: 4, 2: 4, 3: 5, 4: 5, 5: 2, 6: 3, 7: 3 },
  { 1: 3, 2: 5, 3: 4, 4: 4, 5: 4, 6: 2, 7: 5 },
];

// [DERIVED] hand-computed column means of RATINGS, two decimals
const EXPECTED_MEANS: Record<string, number> = {
  "1": 4.0,
  "2": 4.33,
  "3": 4.33,
  "4": 4.67,
  "5": 3.0,
  "6": 2.33,
  "7": 4.0,
};

describe.skipIf(!backendAvailable)("scripted survey session", () => {
  it("completes a 3-chart assignment and the stats match hand-computed means", async () => {
    const container = mountApp();
    const controller = new SurveyController(new SurveyApi(BASE), "r1", container, document);
    await controller.start();
    await waitFor(() => container.querySelector(".progress") !== null);
    expect(container.querySelector(".progress")?.textContent).toBe("Chart 1 of 3");

    for (let chart = 0; chart < 3; chart++) {
      await waitFor(
        () =>
          container.querySelector(".progress")?.textContent === `Chart ${chart + 1} of 3` &&
          container.querySelectorAll("fieldset.rating-item").length === 7,
        20_000,
        `chart ${chart + 1} view`,
      );
      const ratings = RATINGS[chart];
      if (!ratings) throw new Error("missing ratings fixture");
      await rateCurrentChart(container, ratings);
    }

    await waitFor(
      () => container.querySelector(".completion") !== null,
      20_000,
      "completion screen",
    );

    const stats = await (
      await fetch(`${BASE}/api/stats?condition=${encodeURIComponent(CONDITION)}`)
    ).json();
    expect(stats.n).toBe(3);
    expect(stats.item_means).toEqual(EXPECTED_MEANS);
  });

  it("rater-facing DOM never names a model or strategy", async () => {
    const container = mountApp();
    const controller = new SurveyController(new SurveyApi(BASE), "r2", container, document);
    await controller.start();
    await waitFor(() => container.querySelector(".progress") !== null);
    const html = document.body.innerHTML.toLowerCase();
    for (const leak of ["mock-gen", "zero_shot", "zero-shot", "few_shot", "few-shot"]) {
      expect(html).not.toContain(leak);
    }
  });

  it("duplicate submission is rejected and the UI resyncs without data loss", async () => {
    const container = mountApp();
    const api = new SurveyApi(BASE);
    const controller = new SurveyController(api, "r2", container, document);
    await controller.start();
    await waitFor(() => container.querySelectorAll("fieldset.rating-item").length === 7);
    expect(container.querySelector(".progress")?.textContent).toBe("Chart 1 of 3");

    // another tab submits chart 1 behind the UI's back
    const assignment = await api.fetchAssignment("r2");
    const firstChart = assignment.chart_ids[0];
    if (!firstChart) throw new Error("empty assignment");
    const outOfBand = await api.submitResponse(
      "r2",
      firstChart,
      new Map([[1, 1], [2, 1], [3, 1], [4, 1], [5, 1], [6, 1], [7, 1]]),
    );
    expect(outOfBand.status).toBe(200);

    // the stale UI still shows chart 1; submitting must 409 and resync
    await rateCurrentChart(container, { 1: 5, 2: 5, 3: 5, 4: 5, 5: 5, 6: 5, 7: 5 });
    await waitFor(
      () => container.querySelector(".progress")?.textContent === "Chart 2 of 3",
      20_000,
      "resynced cursor",
    );

    // no data loss: the out-of-band all-ones response survived
    const after = await api.fetchAssignment("r2");
    expect(after.completed).toEqual([firstChart]);
    const stats = await (
      await fetch(`${BASE}/api/stats?condition=${encodeURIComponent(CONDITION)}`)
    ).json();
    expect(stats.n).toBe(4); // r1's three plus r2's out-of-band one
  });
});
