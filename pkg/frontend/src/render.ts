/**
 * Field-to-pixels rendering. The pure part (fieldToRgba) is separated from
 * the canvas wrapper so tests can compare rendered bytes directly.
 */

import { ColorScale } from "./color.js";

export interface GridDims {
  rows: number;
  cols: number;
}

/** Row-major grid dimensions from the service's grid_shape. */
export function gridDims(shape: number[] | null, l: number): GridDims {
  const active = (shape ?? []).filter((e) => e > 1);
  if (active.length === 0) return { rows: 1, cols: l };
  if (active.length === 1) return { rows: 1, cols: active[0] };
  const rows = active[0];
  return { rows, cols: Math.floor(l / rows) };
}

/** RGBA bytes for a row-major field, one pixel per cell, opaque. */
export function fieldToRgba(
  values: ArrayLike<number>,
  dims: GridDims,
  scale: ColorScale,
): Uint8ClampedArray<ArrayBuffer> {
  const out = new Uint8ClampedArray(dims.rows * dims.cols * 4);
  for (let i = 0; i < dims.rows * dims.cols; i++) {
    const [r, g, b] = scale.rgb(values[i]);
    out[4 * i] = r;
    out[4 * i + 1] = g;
    out[4 * i + 2] = b;
    out[4 * i + 3] = 255;
  }
  return out;
}

/** Paint a field at native resolution; CSS upscales with pixelated edges. */
export function drawField(
  canvas: HTMLCanvasElement,
  values: ArrayLike<number>,
  dims: GridDims,
  scale: ColorScale,
): void {
  canvas.width = dims.cols;
  canvas.height = dims.rows;
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  const image = new ImageData(fieldToRgba(values, dims, scale), dims.cols,
    dims.rows);
  ctx.putImageData(image, 0, 0);
}
