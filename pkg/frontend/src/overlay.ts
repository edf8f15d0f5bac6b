/** Pure geometry helpers for the canvas view.
 *
 * The canvas is drawn at an integer zoom with nearest-neighbor scaling, so
 * image pixel (x, y) occupies the square [x*zoom, (x+1)*zoom) on screen.
 * Converting a pointer position back through `canvasToImage` therefore
 * lands on the same image pixel at every zoom level.
 */

import type { Point, RegionInfo } from "./api.js";

/** Map canvas coordinates to the image pixel under them. */
export function canvasToImage(
  canvasX: number,
  canvasY: number,
  zoom: number,
  width: number,
  height: number,
): Point {
  const clamp = (v: number, hi: number) =>
    Math.min(Math.max(Math.floor(v / zoom), 0), hi - 1);
  return [clamp(canvasX, width), clamp(canvasY, height)];
}

/** Canvas-space position of an image-space point at the given zoom. */
export function imageToCanvas(point: Point, zoom: number): Point {
  return [point[0] * zoom, point[1] * zoom];
}

/** Nearest-centroid region lookup, used for the immediate client-side
 * stroke highlight.  Regions are compact superpixels, so the nearest
 * centroid is the stroked region in all but boundary-grazing cases; the
 * authoritative assignment always comes back with the next mask. */
export function nearestRegion(
  regions: readonly RegionInfo[],
  x: number,
  y: number,
): RegionInfo | null {
  let best: RegionInfo | null = null;
  let bestDist = Infinity;
  for (const region of regions) {
    const dx = region.centroid[0] - x;
    const dy = region.centroid[1] - y;
    const dist = dx * dx + dy * dy;
    if (dist < bestDist) {
      bestDist = dist;
      best = region;
    }
  }
  return best;
}

/** Distinct region ids highlighted by a set of stroke paths. */
export function strokedRegionIds(
  regions: readonly RegionInfo[],
  paths: readonly (readonly Point[])[],
): number[] {
  const ids = new Set<number>();
  for (const path of paths) {
    for (const [x, y] of path) {
      const region = nearestRegion(regions, x, y);
      if (region !== null) ids.add(region.id);
    }
  }
  return [...ids].sort((a, b) => a - b);
}
