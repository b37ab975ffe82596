/** Drag-to-order list controller.
 *
 * Rows move with the pointer (mouse or touch) and can also be nudged with
 * the keyboard (arrow keys on a focused row). Geometry is read through an
 * injectable measurer so automated tests can drive real pointer events in a
 * headless DOM with deterministic row positions.
 */

import { moveItem, targetIndex } from "./ranking.js";
import type { ItemView } from "./types.js";

export type RowMeasurer = (rows: HTMLElement[]) => number[];

const defaultMeasurer: RowMeasurer = (rows) =>
  rows.map((row) => {
    const box = row.getBoundingClientRect();
    return box.top + box.height / 2;
  });

export interface ReorderableOptions {
  onChange?: (order: number[]) => void;
  measurer?: RowMeasurer;
}

export class ReorderableList {
  private root: HTMLElement;
  private onChange: (order: number[]) => void;
  private measurer: RowMeasurer;
  private draggedRow: HTMLElement | null = null;
  private moveListener: ((ev: MouseEvent) => void) | null = null;
  private upListener: ((ev: MouseEvent) => void) | null = null;

  constructor(root: HTMLElement, items: ItemView[], options: ReorderableOptions = {}) {
    this.root = root;
    this.onChange = options.onChange ?? (() => undefined);
    this.measurer = options.measurer ?? defaultMeasurer;
    root.classList.add("reorderable");
    for (const item of items) {
      root.appendChild(this.buildRow(item));
    }
  }

  private buildRow(item: ItemView): HTMLElement {
    const doc = this.root.ownerDocument;
    const row = doc.createElement("li");
    row.className = "reorderable-row";
    row.tabIndex = 0;
    row.dataset.itemId = String(item.id);
    if (/^https?:\/\//.test(item.payload)) {
      const img = doc.createElement("img");
      img.src = item.payload;
      img.alt = `item ${item.id}`;
      img.addEventListener("error", () => {
        row.textContent = `item ${item.id} (image unavailable, click to retry)`;
        row.addEventListener("click", () => row.replaceChildren(img), { once: true });
      });
      row.appendChild(img);
    } else {
      row.textContent = item.payload;
    }
    row.addEventListener("mousedown", (ev) => this.onMouseDown(ev, row));
    row.addEventListener("keydown", (ev) => this.onKeyDown(ev, row));
    return row;
  }

  rows(): HTMLElement[] {
    return Array.from(this.root.querySelectorAll<HTMLElement>(".reorderable-row"));
  }

  /** Item ids in current on-screen order, top first. */
  order(): number[] {
    return this.rows().map((row) => Number(row.dataset.itemId));
  }

  private onMouseDown(ev: MouseEvent, row: HTMLElement): void {
    if (ev.button !== 0) return;
    ev.preventDefault();
    this.draggedRow = row;
    row.classList.add("dragging");
    const doc = this.root.ownerDocument;
    this.moveListener = (moveEv: MouseEvent) => this.onMouseMove(moveEv);
    this.upListener = () => this.onMouseUp();
    doc.addEventListener("mousemove", this.moveListener);
    doc.addEventListener("mouseup", this.upListener);
  }

  private onMouseMove(ev: MouseEvent): void {
    if (!this.draggedRow) return;
    const rows = this.rows();
    const from = rows.indexOf(this.draggedRow);
    const to = targetIndex(this.measurer(rows), ev.clientY);
    if (to !== from) {
      this.applyOrder(moveItem(rows, from, to));
    }
  }

  private onMouseUp(): void {
    if (!this.draggedRow) return;
    this.draggedRow.classList.remove("dragging");
    this.draggedRow = null;
    const doc = this.root.ownerDocument;
    if (this.moveListener) doc.removeEventListener("mousemove", this.moveListener);
    if (this.upListener) doc.removeEventListener("mouseup", this.upListener);
    this.moveListener = null;
    this.upListener = null;
    this.onChange(this.order());
  }

  private onKeyDown(ev: KeyboardEvent, row: HTMLElement): void {
    const delta = ev.key === "ArrowUp" ? -1 : ev.key === "ArrowDown" ? 1 : 0;
    if (delta === 0) return;
    ev.preventDefault();
    const rows = this.rows();
    const from = rows.indexOf(row);
    const to = from + delta;
    if (to < 0 || to >= rows.length) return;
    this.applyOrder(moveItem(rows, from, to));
    row.focus();
    this.onChange(this.order());
  }

  private applyOrder(rows: HTMLElement[]): void {
    for (const row of rows) {
      this.root.appendChild(row);
    }
  }
}
