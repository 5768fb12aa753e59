/**
 * View model for the annotation canvas: rectangles drawn over uploaded
 * images get sequential numbers and colors from a fixed 8-color cycle, with
 * an undo stack and normalized coordinates independent of display zoom.
 */

import type { RegionPayload } from "../api/types.js";

/** Fixed, deterministic color cycle for region numbering. */
export const REGION_COLORS = [
  "#e6194b", // red
  "#3cb44b", // green
  "#4363d8", // blue
  "#f58231", // orange
  "#911eb4", // purple
  "#42d4f4", // cyan
  "#f032e6", // magenta
  "#9a6324", // brown
] as const;

export interface PixelRect {
  x: number;
  y: number;
  width: number;
  height: number;
}

export interface ViewSize {
  width: number;
  height: number;
}

export interface DrawnRegion {
  regionId: number;
  imageId: string;
  /** Normalized [x_min, y_min, x_max, y_max] in [0, 1]. */
  bbox: [number, number, number, number];
  colorIndex: number;
}

export function colorForRegion(region: DrawnRegion): string {
  return REGION_COLORS[region.colorIndex % REGION_COLORS.length]!;
}

const clamp01 = (v: number) => Math.min(1, Math.max(0, v));

export class AnnotationCanvasModel {
  private regions: DrawnRegion[] = [];
  private nextId = 1;

  /** Add a box given pixel coordinates in the current view; coordinates are
   * normalized against the view size, so zoom level never leaks into the
   * payload. */
  addBox(imageId: string, rect: PixelRect, view: ViewSize): DrawnRegion {
    if (view.width <= 0 || view.height <= 0) {
      throw new Error("view size must be positive");
    }
    const x0 = clamp01(rect.x / view.width);
    const y0 = clamp01(rect.y / view.height);
    const x1 = clamp01((rect.x + rect.width) / view.width);
    const y1 = clamp01((rect.y + rect.height) / view.height);
    const region: DrawnRegion = {
      regionId: this.nextId,
      imageId,
      bbox: [Math.min(x0, x1), Math.min(y0, y1), Math.max(x0, x1), Math.max(y0, y1)],
      colorIndex: (this.nextId - 1) % REGION_COLORS.length,
    };
    this.nextId += 1;
    this.regions.push(region);
    return region;
  }

  /** Remove the most recent box; its number is reused by the next draw. */
  undo(): DrawnRegion | undefined {
    const removed = this.regions.pop();
    if (removed !== undefined) {
      this.nextId = removed.regionId;
    }
    return removed;
  }

  clearAll(): void {
    this.regions = [];
    this.nextId = 1;
  }

  list(): readonly DrawnRegion[] {
    return this.regions;
  }

  get nextLabel(): number {
    return this.nextId;
  }

  /** Region payloads in the exact numbering order sent to the backend. */
  toPayload(): RegionPayload[] {
    return this.regions.map((r) => ({
      region_id: r.regionId,
      image_id: r.imageId,
      bbox: r.bbox,
      color_index: r.colorIndex,
    }));
  }
}
