/**
 * One color scale for the whole session. Every heatmap (members and the
 * observation alike) maps values through the same [min, max] so fields can
 * be compared by eye; per-panel normalization would make identical fields
 * render differently.
 */

export type Rgb = [number, number, number];

// viridis anchor points, dark to bright
const STOPS: Rgb[] = [
  [68, 1, 84],
  [72, 40, 120],
  [62, 74, 137],
  [49, 104, 142],
  [38, 130, 142],
  [31, 158, 137],
  [53, 183, 121],
  [110, 206, 88],
  [181, 222, 43],
  [253, 231, 37],
];

export interface ColorScale {
  readonly min: number;
  readonly max: number;
  rgb(value: number): Rgb;
}

export function makeScale(min: number, max: number): ColorScale {
  const span = max - min;
  return {
    min,
    max,
    rgb(value: number): Rgb {
      // constant fields get the middle of the ramp
      const t = span > 0 ? Math.min(1, Math.max(0, (value - min) / span)) : 0.5;
      const pos = t * (STOPS.length - 1);
      const lo = Math.min(STOPS.length - 2, Math.floor(pos));
      const frac = pos - lo;
      const a = STOPS[lo];
      const b = STOPS[lo + 1];
      return [
        Math.round(a[0] + (b[0] - a[0]) * frac),
        Math.round(a[1] + (b[1] - a[1]) * frac),
        Math.round(a[2] + (b[2] - a[2]) * frac),
      ];
    },
  };
}

/** Scale spanning every field of the session (observation included). */
export function sharedScale(fields: ArrayLike<number>[]): ColorScale {
  let min = Infinity;
  let max = -Infinity;
  for (const field of fields) {
    for (let i = 0; i < field.length; i++) {
      const v = field[i];
      if (v < min) min = v;
      if (v > max) max = v;
    }
  }
  if (!isFinite(min)) {
    min = 0;
    max = 1;
  }
  return makeScale(min, max);
}

export function cssColor([r, g, b]: Rgb): string {
  return `rgb(${r}, ${g}, ${b})`;
}
