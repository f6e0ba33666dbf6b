/** Bounded attempt history with exact-request restore.
 *
 * Each attempt stores the serialized spec string exactly as it went over
 * the wire, so restoring an entry and resending reproduces a
 * byte-identical request. Capacity 10, oldest evicted first.
 */

import { DenoiseResponse, MapSpec } from "./api.js";

export const HISTORY_DEPTH = 10;

export interface Attempt {
  specJson: string;
  spec: MapSpec;
  response: DenoiseResponse;
  label: string;
}

export class History {
  private items: Attempt[] = [];

  constructor(readonly capacity: number = HISTORY_DEPTH) {
    if (capacity < 1) throw new RangeError("history capacity must be >= 1");
  }

  get length(): number {
    return this.items.length;
  }

  /** Newest first. */
  entries(): readonly Attempt[] {
    return this.items;
  }

  push(attempt: Attempt): void {
    this.items.unshift(attempt);
    if (this.items.length > this.capacity) {
      this.items.length = this.capacity;
    }
  }

  get(index: number): Attempt {
    const item = this.items[index];
    if (item === undefined) {
      throw new RangeError(`no history entry at ${index}`);
    }
    return item;
  }
}
