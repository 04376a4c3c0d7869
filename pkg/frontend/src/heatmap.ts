/** Heatmap payload decoding (exact: the UI never recomputes values) and the
 * color ramp used by the canvas overlay.
 */
import type { HeatmapPayload } from "./types";

export interface DecodedHeatmap {
  gridW: number;
  gridH: number;
  /** x-major: cell (x, y) at index x * gridH + y. */
  values: Float32Array;
  at(x: number, y: number): number;
}

export function decodeHeatmap(payload: HeatmapPayload): DecodedHeatmap {
  if (payload.encoding !== "f32le") {
    throw new Error(`unsupported heatmap encoding: ${payload.encoding}`);
  }
  const binary = atob(payload.values_b64);
  const n = payload.grid_w * payload.grid_h;
  if (binary.length !== n * 4) {
    throw new Error(`payload holds ${binary.length} bytes, expected ${n * 4}`);
  }
  const bytes = new Uint8Array(binary.length);
  for (let i = 0; i < binary.length; i++) bytes[i] = binary.charCodeAt(i);
  // Platform byte order is little-endian everywhere we run, but decode
  // explicitly so the test suite would catch a mismatch anyway.
  const view = new DataView(bytes.buffer);
  const values = new Float32Array(n);
  for (let i = 0; i < n; i++) values[i] = view.getFloat32(i * 4, true);
  const gridH = payload.grid_h;
  return {
    gridW: payload.grid_w,
    gridH,
    values,
    at: (x, y) => values[x * gridH + y],
  };
}

/** Argmax cell in (x, y); ties resolve to the lowest flat index, matching
 * the service's own peak field. */
export function peakCell(hm: DecodedHeatmap): [number, number] {
  let best = 0;
  for (let i = 1; i < hm.values.length; i++) {
    if (hm.values[i] > hm.values[best]) best = i;
  }
  return [Math.floor(best / hm.gridH), best % hm.gridH];
}

/** FNV-1a over the payload bytes; shown in the debug panel so a human can
 * compare what the canvas renders against what the service sent. */
export function payloadChecksum(payload: HeatmapPayload): string {
  const binary = atob(payload.values_b64);
  let hash = 0x811c9dc5;
  for (let i = 0; i < binary.length; i++) {
    hash ^= binary.charCodeAt(i);
    hash = Math.imul(hash, 0x01000193);
  }
  return (hash >>> 0).toString(16).padStart(8, "0");
}

/** Perceptual-ish dark-blue -> yellow ramp; alpha proportional to value. */
export function rampColor(value: number): [number, number, number, number] {
  const v = Math.max(0, Math.min(1, value));
  const r = Math.round(255 * Math.min(1, 2.5 * v));
  const g = Math.round(255 * Math.max(0, 1.6 * v - 0.35));
  const b = Math.round(255 * Math.max(0, 0.9 - 1.4 * v));
  return [r, g, b, v];
}
