/** Pure list-reordering helpers shared by the drag controller and tests. */

/** Move the element at `from` so it lands at index `to`; returns a new array. */
export function moveItem<T>(order: readonly T[], from: number, to: number): T[] {
  if (from < 0 || from >= order.length || to < 0 || to >= order.length) {
    throw new RangeError(`move ${from} -> ${to} out of bounds for ${order.length} items`);
  }
  const next = [...order];
  const [item] = next.splice(from, 1);
  next.splice(to, 0, item);
  return next;
}

/**
 * The destination index for a pointer at `pointerY`, given each row's
 * vertical center: the first row whose center is at or below the pointer.
 * A pointer below every center lands on the last slot.
 */
export function targetIndex(rowCenters: readonly number[], pointerY: number): number {
  for (let i = 0; i < rowCenters.length; i++) {
    if (pointerY <= rowCenters[i]) return i;
  }
  return Math.max(rowCenters.length - 1, 0);
}
