import { Region } from './types.js';

export interface Point {
  x: number;
  y: number;
}

const clamp01 = (v: number) => Math.min(1, Math.max(0, v));

/**
 * Convert a drag in displayed-pixel coordinates to a normalized region.
 * Corners are swapped so x0 < x1 and y0 < y1 regardless of drag direction,
 * coordinates are clamped to the image bounds, and zero-area drags yield
 * null (the caller fires no request).
 */
export function dragToRegion(
  start: Point,
  end: Point,
  displayWidth: number,
  displayHeight: number,
): Region | null {
  if (displayWidth <= 0 || displayHeight <= 0) {
    return null;
  }
  const x0 = clamp01(Math.min(start.x, end.x) / displayWidth);
  const x1 = clamp01(Math.max(start.x, end.x) / displayWidth);
  const y0 = clamp01(Math.min(start.y, end.y) / displayHeight);
  const y1 = clamp01(Math.max(start.y, end.y) / displayHeight);
  if (x1 - x0 <= 0 || y1 - y0 <= 0) {
    return null;
  }
  return { x0, y0, x1, y1 };
}

/** Back-projection of a region onto the displayed image, for the selection rectangle. */
export function regionToPixels(
  region: Region,
  displayWidth: number,
  displayHeight: number,
): { left: number; top: number; width: number; height: number } {
  return {
    left: region.x0 * displayWidth,
    top: region.y0 * displayHeight,
    width: (region.x1 - region.x0) * displayWidth,
    height: (region.y1 - region.y0) * displayHeight,
  };
}
