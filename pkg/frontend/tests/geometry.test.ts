import { describe, expect, it } from "vitest";

import {
  imageToScreen,
  rectFromDrag,
  screenToImage,
  type Point,
  type ViewTransform,
} from "../src/geometry.js";

const IMG_W = 1000;
const IMG_H = 1400;

describe("coordinate round trip", () => {
  // acceptance: identity up to 1 px at zooms 0.25, 1, 8
  const zooms = [0.25, 1, 8];
  const pans = [
    { panX: 0, panY: 0 },
    { panX: -123.5, panY: 77.25 },
    { panX: 400, panY: -900 },
  ];

  it("screen -> image -> screen is identity within 1 px", () => {
    for (const zoom of zooms) {
      for (const pan of pans) {
        const view: ViewTransform = { zoom, ...pan };
        for (const p of samplePoints()) {
          const back = imageToScreen(screenToImage(p, view), view);
          expect(Math.abs(back.x - p.x)).toBeLessThanOrEqual(1);
          expect(Math.abs(back.y - p.y)).toBeLessThanOrEqual(1);
        }
      }
    }
  });

  it("image -> screen -> image is identity within 1 px", () => {
    for (const zoom of zooms) {
      const view: ViewTransform = { zoom, panX: 31.7, panY: -8.2 };
      for (const p of samplePoints()) {
        const back = screenToImage(imageToScreen(p, view), view);
        expect(Math.abs(back.x - p.x)).toBeLessThanOrEqual(1);
        expect(Math.abs(back.y - p.y)).toBeLessThanOrEqual(1);
      }
    }
  });

  function samplePoints(): Point[] {
    const pts: Point[] = [];
    for (let i = 0; i < 50; i++) {
      pts.push({ x: (i * 137.31) % 2000 - 400, y: (i * 89.7) % 2800 - 400 });
    }
    return pts;
  }
});

describe("rectFromDrag", () => {
  it("maps a drag over image pixels (10,10)-(110,60) at zoom 2 to [10,10,100,50]", () => {
    const view: ViewTransform = { zoom: 2, panX: 0, panY: 0 };
    const start = imageToScreen({ x: 10, y: 10 }, view);
    const end = imageToScreen({ x: 110, y: 60 }, view);
    expect(rectFromDrag(start, end, view, IMG_W, IMG_H)).toEqual([10, 10, 100, 50]);
  });

  it("handles pan and reversed drag direction", () => {
    const view: ViewTransform = { zoom: 2, panX: -55, panY: 17 };
    const start = imageToScreen({ x: 110, y: 60 }, view);
    const end = imageToScreen({ x: 10, y: 10 }, view);
    expect(rectFromDrag(start, end, view, IMG_W, IMG_H)).toEqual([10, 10, 100, 50]);
  });

  it("rounds sub-pixel corners to integers", () => {
    const view: ViewTransform = { zoom: 3, panX: 1, panY: 1 };
    const start = imageToScreen({ x: 10.4, y: 9.6 }, view);
    const end = imageToScreen({ x: 20.6, y: 19.4 }, view);
    expect(rectFromDrag(start, end, view, IMG_W, IMG_H)).toEqual([10, 10, 11, 9]);
  });

  it("discards drags fully outside the image", () => {
    const view: ViewTransform = { zoom: 1, panX: 0, panY: 0 };
    expect(rectFromDrag({ x: -300, y: -300 }, { x: -100, y: -100 }, view, IMG_W, IMG_H))
      .toBeNull();
    expect(rectFromDrag({ x: IMG_W + 10, y: 10 }, { x: IMG_W + 200, y: 300 }, view, IMG_W, IMG_H))
      .toBeNull();
  });

  it("clamps partially-outside drags to the image bounds", () => {
    const view: ViewTransform = { zoom: 1, panX: 0, panY: 0 };
    expect(rectFromDrag({ x: -50, y: -50 }, { x: 100, y: 80 }, view, IMG_W, IMG_H))
      .toEqual([0, 0, 100, 80]);
  });

  it("discards tiny drags below the 4x4 minimum", () => {
    const view: ViewTransform = { zoom: 1, panX: 0, panY: 0 };
    expect(rectFromDrag({ x: 10, y: 10 }, { x: 11, y: 11 }, view, IMG_W, IMG_H)).toBeNull();
    expect(rectFromDrag({ x: 10, y: 10 }, { x: 10, y: 10 }, view, IMG_W, IMG_H)).toBeNull();
    expect(rectFromDrag({ x: 10, y: 10 }, { x: 13.4, y: 200 }, view, IMG_W, IMG_H)).toBeNull();
  });

  it("keeps exactly 4x4 drags", () => {
    const view: ViewTransform = { zoom: 1, panX: 0, panY: 0 };
    expect(rectFromDrag({ x: 10, y: 10 }, { x: 14, y: 14 }, view, IMG_W, IMG_H))
      .toEqual([10, 10, 4, 4]);
  });
});
