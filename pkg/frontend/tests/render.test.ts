import { describe, expect, it } from "vitest";

import { makeScale } from "../src/color.js";
import { fieldToRgba, gridDims } from "../src/render.js";

describe("grid dimensions", () => {
  it("uses the active axes of the reported shape", () => {
    expect(gridDims([20, 20, 1], 400)).toEqual({ rows: 20, cols: 20 });
    expect(gridDims([4, 6], 24)).toEqual({ rows: 4, cols: 6 });
  });

  it("renders flat vectors as a single row", () => {
    expect(gridDims([12], 12)).toEqual({ rows: 1, cols: 12 });
    expect(gridDims(null, 7)).toEqual({ rows: 1, cols: 7 });
  });

  it("collapses deeper shapes into rows by leading axis", () => {
    expect(gridDims([3, 4, 2], 24)).toEqual({ rows: 3, cols: 8 });
  });
});

describe("field rendering", () => {
  const dims = { rows: 2, cols: 3 };

  it("produces opaque row-major RGBA", () => {
    const scale = makeScale(0, 5);
    const out = fieldToRgba([0, 1, 2, 3, 4, 5], dims, scale);
    expect(out.length).toBe(2 * 3 * 4);
    for (let i = 0; i < 6; i++) expect(out[4 * i + 3]).toBe(255);
    expect([out[0], out[1], out[2]]).toEqual(scale.rgb(0));
    expect([out[20], out[21], out[22]]).toEqual(scale.rgb(5));
  });

  it("renders identical fields to identical pixels on a shared scale", () => {
    const scale = makeScale(-1, 1);
    const field = [0.2, -0.4, 0.9, -1.0, 0.0, 1.0];
    const a = fieldToRgba(field, dims, scale);
    const b = fieldToRgba([...field], dims, scale);
    expect(Array.from(a)).toEqual(Array.from(b));
  });

  it("renders different fields to different pixels on a shared scale", () => {
    const scale = makeScale(-1, 1);
    const a = fieldToRgba([0.2, -0.4, 0.9, -1.0, 0.0, 1.0], dims, scale);
    const b = fieldToRgba([0.2, -0.4, 0.9, -1.0, 0.0, -1.0], dims, scale);
    expect(Array.from(a)).not.toEqual(Array.from(b));
  });
});
