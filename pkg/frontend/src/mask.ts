/** Screen-space lasso to world selector conversion.
 *
 * Membership is tested against the projected primitive centers (not the full
 * splat footprint); the server recomputes nothing, it just receives the
 * explicit index set.
 */

import type { ProjectedCenters } from "./api.js";

export interface Point {
  x: number;
  y: number;
}

/** Even-odd rule point-in-polygon test. */
export function pointInPolygon(p: Point, polygon: Point[]): boolean {
  let inside = false;
  const n = polygon.length;
  for (let i = 0, j = n - 1; i < n; j = i++) {
    const a = polygon[i];
    const b = polygon[j];
    const crosses =
      a.y > p.y !== b.y > p.y &&
      p.x < ((b.x - a.x) * (p.y - a.y)) / (b.y - a.y) + a.x;
    if (crosses) inside = !inside;
  }
  return inside;
}

/** Indices of visible primitives whose projected center falls in the lasso. */
export function lassoSelect(centers: ProjectedCenters, lasso: Point[]): number[] {
  if (lasso.length < 3) return [];
  const out: number[] = [];
  for (let i = 0; i < centers.u.length; i++) {
    if (!centers.visible[i]) continue;
    if (pointInPolygon({ x: centers.u[i], y: centers.v[i] }, lasso)) out.push(i);
  }
  return out;
}

/** Rectangle covering the whole viewport, as a lasso polygon. */
export function fullCanvasLasso(width: number, height: number): Point[] {
  return [
    { x: -1, y: -1 },
    { x: width + 1, y: -1 },
    { x: width + 1, y: height + 1 },
    { x: -1, y: height + 1 },
  ];
}
