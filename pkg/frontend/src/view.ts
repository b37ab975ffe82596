/** Query rendering and the submit flow.
 *
 * The head stays fixed while the body list is reorderable most-similar
 * first. Submit stays disabled until the user reorders (or explicitly
 * confirms the shown order via keyboard); elapsed time runs from first
 * render to submit on a monotonic clock.
 */

import { ReorderableList, RowMeasurer } from "./reorderable.js";
import type { QueryView, TimingRecord } from "./types.js";

export interface RenderedQuery {
  /** Current on-screen body order, most similar first. */
  order(): number[];
  /** Seconds since the query was first rendered (monotonic). */
  elapsedSeconds(): number;
  submitButton: HTMLButtonElement;
  list: ReorderableList;
}

export interface RenderOptions {
  onSubmit: (ordering: number[], elapsedSeconds: number) => void;
  measurer?: RowMeasurer;
  now?: () => number;
}

export function renderQuery(
  container: HTMLElement,
  view: QueryView,
  options: RenderOptions,
): RenderedQuery {
  const doc = container.ownerDocument;
  const now = options.now ?? (() => performance.now());
  container.replaceChildren();

  const head = doc.createElement("div");
  head.className = "head-item";
  head.textContent = view.head.payload;
  container.appendChild(head);

  const progress = doc.createElement("div");
  progress.className = "batch-progress";
  progress.textContent = `query ${view.batch_position} of ${view.batch_size}`;
  container.appendChild(progress);

  const listRoot = doc.createElement("ul");
  container.appendChild(listRoot);

  const submit = doc.createElement("button");
  submit.textContent = "Submit ranking";
  submit.disabled = true;
  container.appendChild(submit);

  const startedAt = now();
  const list = new ReorderableList(listRoot, view.body, {
    onChange: () => {
      submit.disabled = false;
    },
    measurer: options.measurer,
  });

  const rendered: RenderedQuery = {
    order: () => list.order(),
    elapsedSeconds: () => (now() - startedAt) / 1000,
    submitButton: submit,
    list,
  };
  submit.addEventListener("click", () => {
    if (submit.disabled) return;
    submit.disabled = true;
    options.onSubmit(rendered.order(), rendered.elapsedSeconds());
  });
  return rendered;
}

/** Completion summary: per-query times and a per-tuple-size digest. */
export function renderCompletion(container: HTMLElement, timings: TimingRecord[]): void {
  const doc = container.ownerDocument;
  container.replaceChildren();
  const heading = doc.createElement("h2");
  heading.textContent = `Session complete: ${timings.length} responses`;
  container.appendChild(heading);

  const digest = summarizeTimings(timings);
  const table = doc.createElement("table");
  table.className = "timing-summary";
  for (const row of digest) {
    const tr = doc.createElement("tr");
    tr.innerHTML =
      `<td>k=${row.tupleSize}</td><td>${row.count} queries</td>` +
      `<td>median ${row.medianSeconds.toFixed(2)}s</td><td>mean ${row.meanSeconds.toFixed(2)}s</td>`;
    table.appendChild(tr);
  }
  container.appendChild(table);
}

export interface TimingSummaryRow {
  tupleSize: number;
  count: number;
  meanSeconds: number;
  medianSeconds: number;
}

export function summarizeTimings(timings: TimingRecord[]): TimingSummaryRow[] {
  const byK = new Map<number, number[]>();
  for (const t of timings) {
    const bucket = byK.get(t.tupleSize) ?? [];
    bucket.push(t.elapsedSeconds);
    byK.set(t.tupleSize, bucket);
  }
  return [...byK.entries()]
    .sort(([a], [b]) => a - b)
    .map(([tupleSize, values]) => {
      const sorted = [...values].sort((a, b) => a - b);
      const mid = Math.floor(sorted.length / 2);
      const median =
        sorted.length % 2 === 1 ? sorted[mid] : (sorted[mid - 1] + sorted[mid]) / 2;
      return {
        tupleSize,
        count: values.length,
        meanSeconds: values.reduce((acc, v) => acc + v, 0) / values.length,
        medianSeconds: median,
      };
    });
}
