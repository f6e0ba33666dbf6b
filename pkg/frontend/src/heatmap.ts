/** Render a sigma map as RGBA pixels for a canvas overlay.
 *
 * Cold blue at sigma 0 through green to warm red at the top of the
 * range; constant alpha so image structure stays visible underneath.
 */

export const OVERLAY_ALPHA = 115;

export function heatColor(t: number): [number, number, number] {
  const x = Math.min(Math.max(t, 0), 1);
  if (x < 0.5) {
    const u = x * 2;
    return [Math.round(40 * u), Math.round(85 + 140 * u), Math.round(235 - 180 * u)];
  }
  const u = (x - 0.5) * 2;
  return [Math.round(40 + 215 * u), Math.round(225 - 190 * u), Math.round(55 - 35 * u)];
}

export function heatRGBA(
  values: Float32Array,
  width: number,
  height: number,
  sigmaMax: number,
): Uint8ClampedArray<ArrayBuffer> {
  if (values.length !== width * height) {
    throw new Error(`map has ${values.length} values, expected ${width * height}`);
  }
  const out = new Uint8ClampedArray(width * height * 4);
  for (let i = 0; i < values.length; i++) {
    const [r, g, b] = heatColor(values[i] / sigmaMax);
    out[i * 4] = r;
    out[i * 4 + 1] = g;
    out[i * 4 + 2] = b;
    out[i * 4 + 3] = OVERLAY_ALPHA;
  }
  return out;
}
