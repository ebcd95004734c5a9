// Integer-only stroke rasterization so the same stroke list always yields the
// same pixels, independent of platform float quirks or canvas antialiasing.

import type { Stroke } from "./types.js";

/** Binary layer: 0 or 255 per pixel, row-major, resolution x resolution. */
export function rasterizeStrokes(strokes: Stroke[], resolution: number): Uint8Array {
  const grid = new Uint8Array(resolution * resolution);
  for (const stroke of strokes) {
    stampStroke(grid, resolution, stroke);
  }
  return grid;
}

function stampStroke(grid: Uint8Array, resolution: number, stroke: Stroke): void {
  const value = stroke.erase ? 0 : 255;
  const pts = stroke.points;
  if (pts.length === 0) return;
  if (pts.length === 1) {
    stampDisk(grid, resolution, Math.round(pts[0].x), Math.round(pts[0].y), stroke.width, value);
    return;
  }
  for (let i = 1; i < pts.length; i++) {
    line(grid, resolution,
      Math.round(pts[i - 1].x), Math.round(pts[i - 1].y),
      Math.round(pts[i].x), Math.round(pts[i].y),
      stroke.width, value);
  }
}

// Bresenham walk, stamping a disk of the stroke width at every step.
function line(grid: Uint8Array, resolution: number,
              x0: number, y0: number, x1: number, y1: number,
              width: number, value: number): void {
  const dx = Math.abs(x1 - x0);
  const dy = -Math.abs(y1 - y0);
  const sx = x0 < x1 ? 1 : -1;
  const sy = y0 < y1 ? 1 : -1;
  let err = dx + dy;
  let x = x0;
  let y = y0;
  for (;;) {
    stampDisk(grid, resolution, x, y, width, value);
    if (x === x1 && y === y1) break;
    const e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      x += sx;
    }
    if (e2 <= dx) {
      err += dx;
      y += sy;
    }
  }
}

// Disk test in integers: (2*ox)^2 + (2*oy)^2 <= width^2.
function stampDisk(grid: Uint8Array, resolution: number,
                   cx: number, cy: number, width: number, value: number): void {
  const r = Math.floor(width / 2);
  const w2 = width * width;
  for (let oy = -r; oy <= r; oy++) {
    const y = cy + oy;
    if (y < 0 || y >= resolution) continue;
    for (let ox = -r; ox <= r; ox++) {
      const x = cx + ox;
      if (x < 0 || x >= resolution) continue;
      if (4 * (ox * ox + oy * oy) <= w2) {
        grid[y * resolution + x] = value;
      }
    }
  }
}
