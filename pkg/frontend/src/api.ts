/** Client for the denoising service: spec types, serialization, transport.
 *
 * The JSON shapes here are the wire contract; the golden copies live in
 * ../fixtures and are asserted byte-for-byte by both this package's tests
 * and the service's own test suite.
 */

export const SIGMA_MAX = 75;

export interface AnchorPoint {
  r: number;
  c: number;
  sigma: number;
}

export interface UniformSpec {
  kind: "uniform";
  sigma: number;
}

export interface AnchorsSpec {
  kind: "anchors";
  points: AnchorPoint[];
}

export interface RawSpec {
  kind: "raw";
  encoding: "f32le";
  width: number;
  height: number;
  data: string;
}

export type MapSpec = UniformSpec | AnchorsSpec | RawSpec;

export interface MapPayload {
  encoding: "f32le";
  width: number;
  height: number;
  data: string;
}

export interface DenoiseResponse {
  image: string; // base64 PNG
  map: MapPayload;
  width: number;
  height: number;
  channels: number;
  mean_sigma: number;
}

export interface ModelInfo {
  layers: number;
  channels: number;
  color: boolean;
  noise_range: [number, number];
  merged: boolean;
  receptive_field: number;
}

function checkSigma(sigma: number): number {
  if (!Number.isFinite(sigma) || sigma < 0 || sigma > SIGMA_MAX) {
    throw new RangeError(`sigma must be in [0, ${SIGMA_MAX}], got ${sigma}`);
  }
  return sigma;
}

export function uniformSpec(sigma: number): UniformSpec {
  return { kind: "uniform", sigma: checkSigma(sigma) };
}

export function anchorsSpec(points: AnchorPoint[]): AnchorsSpec {
  if (points.length === 0) {
    throw new RangeError("anchors spec needs at least one point");
  }
  // Key order (r, c, sigma) is part of the canonical serialization.
  const cleaned = points.map((p) => {
    if (!Number.isInteger(p.r) || !Number.isInteger(p.c)) {
      throw new RangeError(`anchor position must be integer, got (${p.r}, ${p.c})`);
    }
    return { r: p.r, c: p.c, sigma: checkSigma(p.sigma) };
  });
  return { kind: "anchors", points: cleaned };
}

/** Canonical request serialization: compact JSON, fixed key order. */
export function serializeSpec(spec: MapSpec): string {
  return JSON.stringify(spec);
}

export function bytesFromBase64(b64: string): Uint8Array {
  const bin = atob(b64);
  const out = new Uint8Array(bin.length);
  for (let i = 0; i < bin.length; i++) {
    out[i] = bin.charCodeAt(i);
  }
  return out;
}

/** Decode the service's f32le map payload to row-major sigma values. */
export function decodeMapPayload(payload: MapPayload): Float32Array {
  if (payload.encoding !== "f32le") {
    throw new Error(`unsupported map encoding ${payload.encoding}`);
  }
  const bytes = bytesFromBase64(payload.data);
  const expected = payload.width * payload.height * 4;
  if (bytes.length !== expected) {
    throw new Error(`map payload has ${bytes.length} bytes, expected ${expected}`);
  }
  const view = new DataView(bytes.buffer, bytes.byteOffset, bytes.byteLength);
  const values = new Float32Array(payload.width * payload.height);
  for (let i = 0; i < values.length; i++) {
    values[i] = view.getFloat32(i * 4, true);
  }
  return values;
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    message: string,
  ) {
    super(message);
  }
}

async function errorFrom(response: Response): Promise<ApiError> {
  let message = `request failed with status ${response.status}`;
  try {
    const body = (await response.json()) as { error?: string };
    if (body.error) message = body.error;
  } catch {
    // non-JSON error body; keep the generic message
  }
  return new ApiError(response.status, message);
}

export class Client {
  constructor(
    readonly baseUrl: string,
    private readonly fetchImpl: typeof fetch = fetch,
  ) {}

  async model(): Promise<ModelInfo> {
    const r = await this.fetchImpl(`${this.baseUrl}/api/model`);
    if (!r.ok) throw await errorFrom(r);
    return (await r.json()) as ModelInfo;
  }

  /** POST an already-serialized spec so a resend is byte-identical. */
  async denoise(image: Blob, specJson: string): Promise<DenoiseResponse> {
    const form = new FormData();
    form.append("image", image, "input.png");
    form.append("spec", specJson);
    const r = await this.fetchImpl(`${this.baseUrl}/api/denoise`, {
      method: "POST",
      body: form,
    });
    if (!r.ok) throw await errorFrom(r);
    return (await r.json()) as DenoiseResponse;
  }
}
