/** Screen/image coordinate mapping under zoom and pan.
 *
 * The canvas shows the document at `zoom` screen pixels per image pixel,
 * with the image origin at (panX, panY) on screen. Windows are always
 * stored in image pixel coordinates so the rect sent to the service is
 * independent of the current view.
 */

export interface ViewTransform {
  zoom: number;
  panX: number;
  panY: number;
}

export interface Point {
  x: number;
  y: number;
}

/** [x, y, w, h] in image pixels. */
export type Rect = [number, number, number, number];

export const MIN_WINDOW_SIDE = 4;

export function imageToScreen(p: Point, view: ViewTransform): Point {
  return { x: p.x * view.zoom + view.panX, y: p.y * view.zoom + view.panY };
}

export function screenToImage(p: Point, view: ViewTransform): Point {
  return { x: (p.x - view.panX) / view.zoom, y: (p.y - view.panY) / view.zoom };
}

function clamp(v: number, lo: number, hi: number): number {
  return Math.min(hi, Math.max(lo, v));
}

/**
 * Turn a pointer drag (screen coordinates) into an image-space window rect.
 *
 * Sub-pixel corners round to integers and clamp to the image bounds.
 * Returns null for drags entirely outside the image and for results
 * smaller than MIN_WINDOW_SIDE on either axis (zero-area included).
 */
export function rectFromDrag(
  start: Point,
  end: Point,
  view: ViewTransform,
  imageWidth: number,
  imageHeight: number,
): Rect | null {
  const a = screenToImage(start, view);
  const b = screenToImage(end, view);
  let x0 = Math.round(Math.min(a.x, b.x));
  let y0 = Math.round(Math.min(a.y, b.y));
  let x1 = Math.round(Math.max(a.x, b.x));
  let y1 = Math.round(Math.max(a.y, b.y));
  if (x1 <= 0 || y1 <= 0 || x0 >= imageWidth || y0 >= imageHeight) {
    return null; // no overlap with the image at all
  }
  x0 = clamp(x0, 0, imageWidth);
  x1 = clamp(x1, 0, imageWidth);
  y0 = clamp(y0, 0, imageHeight);
  y1 = clamp(y1, 0, imageHeight);
  const w = x1 - x0;
  const h = y1 - y0;
  if (w < MIN_WINDOW_SIDE || h < MIN_WINDOW_SIDE) {
    return null;
  }
  return [x0, y0, w, h];
}

/** Window rect in screen coordinates, for drawing the overlay. */
export function rectToScreen(rect: Rect, view: ViewTransform): { x: number; y: number; w: number; h: number } {
  const tl = imageToScreen({ x: rect[0], y: rect[1] }, view);
  return { x: tl.x, y: tl.y, w: rect[2] * view.zoom, h: rect[3] * view.zoom };
}
