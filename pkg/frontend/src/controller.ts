// Session flow: fetch the assignment, walk the charts one at a time,
// submit ratings, resync from the server on duplicate-submission replies.

import { SurveyApi } from "./api.js";
import type { AssignmentView } from "./api.js";
import {
  RatingFormState,
  advance,
  canSubmit,
  freshState,
  isComplete,
  nextUnansweredItem,
  resync,
  setRating,
} from "./state.js";
import {
  renderChartView,
  renderCompletion,
  renderErrorBanner,
} from "./view.js";

export class SurveyController {
  private assignment: AssignmentView | null = null;
  private state: RatingFormState = { chartId: null, cursor: 0, selections: new Map() };

  constructor(
    private readonly api: SurveyApi,
    private readonly raterId: string,
    private readonly container: HTMLElement,
    private readonly doc: Document,
  ) {}

  async start(): Promise<void> {
    try {
      this.assignment = await this.api.fetchAssignment(this.raterId);
    } catch (error) {
      this.showError(`Could not load your assignment: ${String(error)}`, () =>
        void this.start(),
      );
      return;
    }
    this.state = freshState(this.assignment);
    await this.showCurrent();
  }

  /** Current form state (exposed for tests and keyboard wiring). */
  get formState(): RatingFormState {
    return this.state;
  }

  handleKey(key: string): void {
    if (!/^[1-5]$/.test(key)) return;
    const target = nextUnansweredItem(this.state);
    if (target === null) return;
    this.select(target, Number(key));
  }

  private select(itemId: number, value: number): void {
    this.state = setRating(this.state, itemId, value);
    // selections only toggle the matching radio and the submit gate; a full
    // re-render would race with rapid input and re-fetch the table
    const radio = this.container.querySelector(
      `fieldset[data-item-id="${itemId}"] input[value="${value}"]`,
    ) as HTMLInputElement | null;
    if (radio) radio.checked = true;
    const submit = this.container.querySelector(
      "button.submit-ratings",
    ) as HTMLButtonElement | null;
    if (submit) submit.disabled = !canSubmit(this.state);
  }

  private async showCurrent(): Promise<void> {
    if (!this.assignment) return;
    if (isComplete(this.assignment, this.state)) {
      renderCompletion(this.doc, this.container, this.assignment.total);
      return;
    }
    const chartId = this.state.chartId;
    if (!chartId) return;
    let table;
    try {
      table = await this.api.fetchTable(chartId);
    } catch (error) {
      this.showError(`Could not load the data table: ${String(error)}`, () =>
        void this.showCurrent(),
      );
      return;
    }
    renderChartView(
      this.doc,
      this.container,
      this.api.chartImageUrl(chartId),
      table,
      this.state,
      { position: this.state.cursor + 1, total: this.assignment.chart_ids.length },
      {
        onSelect: (itemId, value) => this.select(itemId, value),
        onSubmit: () => void this.submit(),
      },
    );
  }

  async submit(): Promise<void> {
    if (!this.assignment || !this.state.chartId || !canSubmit(this.state)) return;
    let result;
    try {
      result = await this.api.submitResponse(
        this.raterId,
        this.state.chartId,
        this.state.selections,
      );
    } catch (error) {
      this.showError(`Submission failed: ${String(error)}`, () => void this.submit());
      return;
    }
    if (result.status === 200) {
      this.state = advance(this.assignment, this.state);
      await this.showCurrent();
      return;
    }
    if (result.status === 409) {
      // the server already has this (rater, chart): trust it and resync
      this.assignment = await this.api.fetchAssignment(this.raterId);
      this.state = resync(this.assignment);
      await this.showCurrent();
      return;
    }
    this.showError(
      `The server rejected the submission (${result.status}): ${result.detail ?? ""}`,
      () => void this.showCurrent(),
    );
  }

  private showError(message: string, onRetry: () => void): void {
    renderErrorBanner(this.doc, this.container, message, onRetry);
  }
}
