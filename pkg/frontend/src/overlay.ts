// Evidence-box overlay geometry: source-image pixels -> display pixels.
// Pure scaling, no rounding, so corners stay exact at any zoom.

import type { Box } from "./types";

export interface Size {
  width: number;
  height: number;
}

export interface OverlayRect {
  left: number;
  top: number;
  width: number;
  height: number;
}

export function overlayRect(box: Box, natural: Size, display: Size): OverlayRect {
  if (natural.width <= 0 || natural.height <= 0) {
    throw new Error("natural image size must be positive");
  }
  const sx = display.width / natural.width;
  const sy = display.height / natural.height;
  const [xMin, yMin, xMax, yMax] = box;
  return {
    left: xMin * sx,
    top: yMin * sy,
    width: (xMax - xMin) * sx,
    height: (yMax - yMin) * sy,
  };
}

/** Corners of the overlay in display space, clockwise from top-left. */
export function overlayCorners(rect: OverlayRect): [number, number][] {
  return [
    [rect.left, rect.top],
    [rect.left + rect.width, rect.top],
    [rect.left + rect.width, rect.top + rect.height],
    [rect.left, rect.top + rect.height],
  ];
}

/** Largest deviation (px) between overlay corners and directly scaled box corners. */
export function maxCornerError(box: Box, natural: Size, display: Size): number {
  const rect = overlayRect(box, natural, display);
  const sx = display.width / natural.width;
  const sy = display.height / natural.height;
  const [xMin, yMin, xMax, yMax] = box;
  const expected: [number, number][] = [
    [xMin * sx, yMin * sy],
    [xMax * sx, yMin * sy],
    [xMax * sx, yMax * sy],
    [xMin * sx, yMax * sy],
  ];
  const got = overlayCorners(rect);
  let worst = 0;
  for (let i = 0; i < 4; i++) {
    worst = Math.max(
      worst,
      Math.abs(got[i][0] - expected[i][0]),
      Math.abs(got[i][1] - expected[i][1]),
    );
  }
  return worst;
}

/** Inline CSS for an absolutely positioned overlay div. */
export function overlayStyle(rect: OverlayRect): string {
  return (
    `left:${rect.left.toFixed(2)}px;top:${rect.top.toFixed(2)}px;` +
    `width:${rect.width.toFixed(2)}px;height:${rect.height.toFixed(2)}px`
  );
}
