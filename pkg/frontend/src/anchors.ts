/** Editor state for region anchors: immutable list operations.
 *
 * Positions are integer pixel coordinates (r = row from top, c = column
 * from left). Sigma moves on a stepped slider, 5 by default as in the
 * interactive workflow, clamped to [0, 75].
 */

import { AnchorPoint, AnchorsSpec, SIGMA_MAX, anchorsSpec } from "./api.js";

export const SIGMA_STEP = 5;

export interface Anchor extends AnchorPoint {
  id: number;
}

export interface Bounds {
  height: number;
  width: number;
}

let nextId = 1;

/** Visible for tests: makes ids predictable. */
export function resetIds(): void {
  nextId = 1;
}

export function inBounds(r: number, c: number, bounds: Bounds): boolean {
  return r >= 0 && r < bounds.height && c >= 0 && c < bounds.width;
}

/** Returns the new list, or null when the position is out of bounds
 * (the caller shows the visual cue). */
export function placeAnchor(
  anchors: readonly Anchor[],
  r: number,
  c: number,
  sigma: number,
  bounds: Bounds,
): Anchor[] | null {
  if (!inBounds(r, c, bounds)) return null;
  return [...anchors, { id: nextId++, r, c, sigma: clampSigma(sigma) }];
}

/** Dragging clamps into the image instead of rejecting. */
export function moveAnchor(
  anchors: readonly Anchor[],
  id: number,
  r: number,
  c: number,
  bounds: Bounds,
): Anchor[] {
  const cr = Math.min(Math.max(Math.round(r), 0), bounds.height - 1);
  const cc = Math.min(Math.max(Math.round(c), 0), bounds.width - 1);
  return anchors.map((a) => (a.id === id ? { ...a, r: cr, c: cc } : a));
}

export function deleteAnchor(anchors: readonly Anchor[], id: number): Anchor[] {
  return anchors.filter((a) => a.id !== id);
}

export function setSigma(
  anchors: readonly Anchor[],
  id: number,
  sigma: number,
): Anchor[] {
  return anchors.map((a) => (a.id === id ? { ...a, sigma: clampSigma(sigma) } : a));
}

export function clampSigma(sigma: number): number {
  return Math.min(Math.max(sigma, 0), SIGMA_MAX);
}

/** Snap to the slider grid: multiples of `step` within [0, 75]. */
export function snapSigma(sigma: number, step: number = SIGMA_STEP): number {
  return clampSigma(Math.round(sigma / step) * step);
}

export function anchorAt(
  anchors: readonly Anchor[],
  r: number,
  c: number,
  radius: number,
): Anchor | null {
  let best: Anchor | null = null;
  let bestD = radius * radius;
  for (const a of anchors) {
    const d = (a.r - r) * (a.r - r) + (a.c - c) * (a.c - c);
    if (d <= bestD) {
      best = a;
      bestD = d;
    }
  }
  return best;
}

/** The exact request spec for the current editor state. */
export function toSpec(anchors: readonly Anchor[]): AnchorsSpec {
  return anchorsSpec(anchors.map((a) => ({ r: a.r, c: a.c, sigma: a.sigma })));
}
