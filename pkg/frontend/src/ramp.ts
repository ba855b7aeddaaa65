/** Per-primitive weight fields for the mix board. */

import type { ProjectedCenters } from "./api.js";

/** Linear left-to-right ramp over the projected primitive centers.
 *
 * `left` is the weight of variation A at the left edge of the viewport and
 * `right` at the right edge; off-screen primitives get the nearest endpoint.
 */
export function xRamp(
  centers: ProjectedCenters,
  left = 1,
  right = 0,
): number[] {
  const w = centers.width;
  return centers.u.map((u) => {
    const t = Math.min(Math.max(u / w, 0), 1);
    return left + t * (right - left);
  });
}

/** Constant field, for parity with the scalar mix control. */
export function constantRamp(n: number, value: number): number[] {
  return new Array(n).fill(value);
}
