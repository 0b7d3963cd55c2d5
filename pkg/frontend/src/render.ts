/** Pure raster-to-pixels rendering: grayscale intensities, predicted-class
 * tint over patch members, circle boundary. No DOM dependencies so the
 * output can be snapshot-tested; the caller blits the buffer into a canvas
 * via ImageData. */

import type { PatchRaster } from "./types.js";

/** Per-class overlay colors (class index -> RGB). */
export const CLASS_COLORS: [number, number, number][] = [
  [64, 64, 255], // class 0: blue
  [255, 64, 64], // class 1: red
  [64, 255, 64], // class 2: green
  [255, 255, 64], // class 3: yellow
];

const TINT = 0.4; // overlay opacity over the grayscale base
const BOUNDARY: [number, number, number] = [255, 255, 255];

const B64 =
  "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

export function decodeIntensities(raster: PatchRaster): Uint8Array {
  const s = raster.intensities_b64.replace(/=+$/, "");
  const out = new Uint8Array(Math.floor((s.length * 3) / 4));
  let acc = 0;
  let bits = 0;
  let j = 0;
  for (const ch of s) {
    acc = (acc << 6) | B64.indexOf(ch);
    bits += 6;
    if (bits >= 8) {
      bits -= 8;
      out[j++] = (acc >> bits) & 0xff;
    }
  }
  return out;
}

export interface RenderedPatch {
  width: number;
  height: number;
  /** RGBA, row-major, length width*height*4. */
  pixels: Uint8ClampedArray;
}

/** True when raster position (x, y) lies inside the patch circle. */
export function inCircle(raster: PatchRaster, x: number, y: number): boolean {
  const { cx, cy, r } = raster.circle;
  return Math.hypot(x - cx, y - cy) <= r + 1e-9;
}

/** Supervoxel id under raster position (x, y); -1 outside any member. */
export function hitSupervoxel(
  raster: PatchRaster,
  x: number,
  y: number,
): number {
  const xi = Math.round(x);
  const yi = Math.round(y);
  if (xi < 0 || yi < 0 || xi >= raster.side || yi >= raster.side) return -1;
  return raster.supervoxel_ids[yi][xi];
}

/** Canvas click position -> in-plane (u, v) coordinates. */
export function toPatchCoords(
  raster: PatchRaster,
  x: number,
  y: number,
): [number, number] {
  return [x - raster.circle.cx, y - raster.circle.cy];
}

export function renderPatch(raster: PatchRaster): RenderedPatch {
  const n = raster.side;
  const intens = decodeIntensities(raster);
  const pixels = new Uint8ClampedArray(n * n * 4);
  const { cx, cy, r } = raster.circle;

  for (let y = 0; y < n; y++) {
    for (let x = 0; x < n; x++) {
      const i = y * n + x;
      const g = intens[i];
      let [cr, cg, cb] = [g, g, g];
      const sv = raster.supervoxel_ids[y][x];
      if (sv >= 0) {
        const cls = raster.predicted[String(sv)] ?? 0;
        const tint = CLASS_COLORS[cls % CLASS_COLORS.length];
        cr = (1 - TINT) * g + TINT * tint[0];
        cg = (1 - TINT) * g + TINT * tint[1];
        cb = (1 - TINT) * g + TINT * tint[2];
      }
      if (Math.abs(Math.hypot(x - cx, y - cy) - r) <= 0.5) {
        [cr, cg, cb] = BOUNDARY;
      }
      const o = i * 4;
      pixels[o] = cr;
      pixels[o + 1] = cg;
      pixels[o + 2] = cb;
      pixels[o + 3] = 255;
    }
  }
  return { width: n, height: n, pixels };
}
