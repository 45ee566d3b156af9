// Rating-session state: which chart the rater is on, which items are set.
// The server is the source of truth for completion; the only client-side
// state is the in-progress form, so a cursor resync can never lose data.

import type { AssignmentView } from "./api.js";
import { SCALE_MAX, SCALE_MIN, SURVEY_ITEMS } from "./items.js";

export interface RatingFormState {
  chartId: string | null;
  cursor: number; // index into the assignment's chart list; == total when done
  selections: Map<number, number>;
}

export function firstPendingIndex(assignment: AssignmentView): number {
  const done = new Set(assignment.completed);
  const index = assignment.chart_ids.findIndex((id) => !done.has(id));
  return index === -1 ? assignment.chart_ids.length : index;
}

export function freshState(assignment: AssignmentView): RatingFormState {
  const cursor = firstPendingIndex(assignment);
  return {
    cursor,
    chartId: assignment.chart_ids[cursor] ?? null,
    selections: new Map(),
  };
}

export function isComplete(assignment: AssignmentView, state: RatingFormState): boolean {
  return state.cursor >= assignment.chart_ids.length;
}

export function setRating(
  state: RatingFormState,
  itemId: number,
  value: number,
): RatingFormState {
  if (!SURVEY_ITEMS.some((item) => item.id === itemId)) {
    throw new Error(`unknown item ${itemId}`);
  }
  if (value < SCALE_MIN || value > SCALE_MAX || !Number.isInteger(value)) {
    throw new Error(`rating out of range: ${value}`);
  }
  const selections = new Map(state.selections);
  selections.set(itemId, value);
  return { ...state, selections };
}

export function canSubmit(state: RatingFormState): boolean {
  return SURVEY_ITEMS.every((item) => state.selections.has(item.id));
}

/** First item the rater has not answered yet (keyboard entry target). */
export function nextUnansweredItem(state: RatingFormState): number | null {
  const item = SURVEY_ITEMS.find((i) => !state.selections.has(i.id));
  return item ? item.id : null;
}

export function advance(
  assignment: AssignmentView,
  state: RatingFormState,
): RatingFormState {
  const cursor = state.cursor + 1;
  return {
    cursor,
    chartId: assignment.chart_ids[cursor] ?? null,
    selections: new Map(),
  };
}

/** Rebuild the cursor from the server's completed list (e.g. after a 409). */
export function resync(assignment: AssignmentView): RatingFormState {
  return freshState(assignment);
}
