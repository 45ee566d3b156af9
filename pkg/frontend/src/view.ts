// DOM construction. Everything rater-facing is built here, so the
// blindness tests target this module: no model or strategy identifiers
// ever enter these nodes, only opaque chart ids.

import type { GroundTruthTable } from "./api.js";
import { SCALE_LABELS, SCALE_MAX, SCALE_MIN, SURVEY_ITEMS } from "./items.js";
import type { RatingFormState } from "./state.js";

export interface ChartViewHandlers {
  onSelect(itemId: number, value: number): void;
  onSubmit(): void;
}

function el<K extends keyof HTMLElementTagNameMap>(
  doc: Document,
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = doc.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

export function renderTable(doc: Document, table: GroundTruthTable): HTMLElement {
  const wrap = el(doc, "section", "gt-table");
  wrap.appendChild(el(doc, "h3", "gt-table-caption", "Original data file"));
  if (table.title) {
    wrap.appendChild(el(doc, "p", "gt-table-title", `Title: ${table.title}`));
  }
  const tbl = el(doc, "table");
  const head = el(doc, "tr");
  for (const header of table.headers) {
    head.appendChild(el(doc, "th", undefined, header));
  }
  tbl.appendChild(head);
  for (const row of table.rows) {
    const tr = el(doc, "tr");
    for (const cell of row) {
      tr.appendChild(el(doc, "td", undefined, cell));
    }
    tbl.appendChild(tr);
  }
  wrap.appendChild(tbl);
  return wrap;
}

export function renderRatingForm(
  doc: Document,
  state: RatingFormState,
  handlers: ChartViewHandlers,
): HTMLElement {
  const form = el(doc, "form", "rating-form");
  form.addEventListener("submit", (event) => event.preventDefault());
  for (const item of SURVEY_ITEMS) {
    const fieldset = el(doc, "fieldset", "rating-item");
    fieldset.dataset["itemId"] = String(item.id);
    fieldset.appendChild(el(doc, "legend", undefined, item.text));
    const scale = el(doc, "div", "scale");
    for (let value = SCALE_MIN; value <= SCALE_MAX; value++) {
      const label = el(doc, "label", "scale-point");
      const input = el(doc, "input") as HTMLInputElement;
      input.type = "radio";
      input.name = `item-${item.id}`;
      input.value = String(value);
      input.checked = state.selections.get(item.id) === value;
      input.addEventListener("change", () => handlers.onSelect(item.id, value));
      label.appendChild(input);
      const caption = SCALE_LABELS[value];
      label.appendChild(
        doc.createTextNode(caption ? `${value} – ${caption}` : String(value)),
      );
      scale.appendChild(label);
    }
    fieldset.appendChild(scale);
    form.appendChild(fieldset);
  }
  const submit = el(doc, "button", "submit-ratings", "Submit ratings") as HTMLButtonElement;
  submit.type = "button";
  submit.disabled = !allSet(state);
  submit.addEventListener("click", () => handlers.onSubmit());
  form.appendChild(submit);
  return form;
}

function allSet(state: RatingFormState): boolean {
  return SURVEY_ITEMS.every((item) => state.selections.has(item.id));
}

export function renderChartView(
  doc: Document,
  container: HTMLElement,
  chartImageUrl: string,
  table: GroundTruthTable,
  state: RatingFormState,
  progress: { position: number; total: number },
  handlers: ChartViewHandlers,
): void {
  container.replaceChildren();
  const header = el(doc, "header");
  header.appendChild(
    el(doc, "p", "progress", `Chart ${progress.position} of ${progress.total}`),
  );
  container.appendChild(header);

  const main = el(doc, "div", "chart-view");
  const img = el(doc, "img", "chart-image") as HTMLImageElement;
  img.src = chartImageUrl;
  img.alt = "Chart to rate";
  main.appendChild(img);
  main.appendChild(renderTable(doc, table));
  container.appendChild(main);
  container.appendChild(renderRatingForm(doc, state, handlers));
}

export function renderCompletion(doc: Document, container: HTMLElement, total: number): void {
  container.replaceChildren();
  const done = el(doc, "section", "completion");
  done.appendChild(el(doc, "h2", undefined, "All charts rated"));
  done.appendChild(
    el(doc, "p", undefined, `You have completed all ${total} charts. Thank you!`),
  );
  container.appendChild(done);
}

export function renderErrorBanner(
  doc: Document,
  container: HTMLElement,
  message: string,
  onRetry: () => void,
): void {
  const existing = container.querySelector(".error-banner");
  if (existing) existing.remove();
  const banner = el(doc, "div", "error-banner");
  banner.appendChild(el(doc, "span", undefined, message));
  const retry = el(doc, "button", "retry", "Retry") as HTMLButtonElement;
  retry.type = "button";
  retry.addEventListener("click", () => {
    banner.remove();
    onRetry();
  });
  banner.appendChild(retry);
  container.prepend(banner);
}
