import { describe, expect, it } from "vitest";

import { clampBox, EditBox, handleAt, hitTest, resizeToHandle } from "../src/boxes.js";
import { fitViewport, imageFromScreen, screenFromImage, zoomAt } from "../src/view.js";

function box(id: number, x: number, y: number, w: number, h: number): EditBox {
  return { id, x, y, w, h, confidence: 0.5, source: "proposed" };
}

describe("clampBox", () => {
  const bounds = { width: 640, height: 480 };

  it("keeps an in-bounds box untouched", () => {
    expect(clampBox({ x: 10, y: 20, w: 100, h: 50 }, bounds)).toEqual({
      x: 10, y: 20, w: 100, h: 50,
    });
  });

  it("pulls an overflowing box back inside", () => {
    const c = clampBox({ x: 600, y: 450, w: 100, h: 80 }, bounds);
    expect(c.x + c.w).toBeLessThanOrEqual(640);
    expect(c.y + c.h).toBeLessThanOrEqual(480);
    expect(c.x).toBeGreaterThanOrEqual(0);
  });

  it("enforces a minimum size", () => {
    const c = clampBox({ x: 10, y: 10, w: 0.5, h: 0.5 }, bounds);
    expect(c.w).toBeGreaterThanOrEqual(4);
    expect(c.h).toBeGreaterThanOrEqual(4);
  });
});

describe("hitTest", () => {
  it("topmost box wins on overlap", () => {
    const boxes = [box(1, 0, 0, 100, 100), box(2, 50, 50, 100, 100)];
    expect(hitTest(boxes, 75, 75)!.id).toBe(2);
    expect(hitTest(boxes, 10, 10)!.id).toBe(1);
    expect(hitTest(boxes, 500, 500)).toBeNull();
  });
});

describe("handles and resize", () => {
  it("finds corner handles within the radius", () => {
    const b = box(1, 100, 100, 50, 50);
    expect(handleAt(b, 100, 100, 5)).toBe("nw");
    expect(handleAt(b, 150, 150, 5)).toBe("se");
    expect(handleAt(b, 125, 125, 5)).toBeNull();
  });

  it("resizes by the southeast handle", () => {
    const r = resizeToHandle({ x: 10, y: 10, w: 20, h: 20 }, "se", 50, 40);
    expect(r).toEqual({ x: 10, y: 10, w: 40, h: 30 });
  });

  it("normalizes a crossing drag", () => {
    const r = resizeToHandle({ x: 10, y: 10, w: 20, h: 20 }, "se", 0, 0);
    expect(r).toEqual({ x: 0, y: 0, w: 10, h: 10 });
  });
});

describe("viewport transform", () => {
  it("screen/image round trip is exact at any zoom", () => {
    let v = fitViewport(640, 640, 1280, 860);
    v = zoomAt(v, 333, 222, 1.7);
    const [sx, sy] = screenFromImage(v, 123.25, 456.5);
    const [ix, iy] = imageFromScreen(v, sx, sy);
    expect(ix).toBeCloseTo(123.25, 9);
    expect(iy).toBeCloseTo(456.5, 9);
  });

  it("letterboxes the image into the canvas", () => {
    const v = fitViewport(640, 480, 1280, 480);
    expect(v.scale).toBe(1);
    expect(v.offsetX).toBe(320);
    expect(v.offsetY).toBe(0);
  });

  it("zoom keeps the anchor point fixed", () => {
    const v0 = fitViewport(640, 640, 800, 800);
    const anchor: [number, number] = [400, 300];
    const before = imageFromScreen(v0, ...anchor);
    const v1 = zoomAt(v0, anchor[0], anchor[1], 2.0);
    const after = imageFromScreen(v1, ...anchor);
    expect(after[0]).toBeCloseTo(before[0], 9);
    expect(after[1]).toBeCloseTo(before[1], 9);
  });
});
