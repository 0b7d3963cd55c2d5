/** Annotation tools: the two-click line tool and click-to-correct tool.
 * Both are pure state machines over raster coordinates; DOM wiring lives
 * in main.ts. */

import { hitSupervoxel, inCircle, toPatchCoords } from "./render.js";
import type { AnnotateBody, PatchRaster } from "./types.js";

export class LineTool {
  private clicks: [number, number][] = [];
  sideAClass = 0;
  sideBClass = 1;

  /** Register a click at raster position (x, y). Clicks outside the circle
   * are ignored. Returns true when two points are staged. */
  click(raster: PatchRaster, x: number, y: number): boolean {
    if (!inCircle(raster, x, y)) return this.ready();
    if (this.clicks.length < 2) this.clicks.push(toPatchCoords(raster, x, y));
    return this.ready();
  }

  ready(): boolean {
    return this.clicks.length === 2;
  }

  pending(): [number, number][] {
    return [...this.clicks];
  }

  reset(): void {
    this.clicks = [];
  }

  /** The Annotation JSON for the staged line; commits only after exactly
   * two in-circle clicks. */
  annotation(queryId: number): AnnotateBody {
    if (!this.ready()) throw new Error("line tool needs two clicks");
    return {
      query_id: queryId,
      line: {
        a: this.clicks[0],
        b: this.clicks[1],
        side_a_class: this.sideAClass,
        side_b_class: this.sideBClass,
      },
    };
  }
}

export class CorrectionTool {
  /** Staged overrides, supervoxel id -> class. */
  private staged = new Map<number, number>();

  /** Clicking a member supervoxel cycles its class; clicks elsewhere are
   * ignored. */
  click(raster: PatchRaster, x: number, y: number, nClasses: number): void {
    const sv = hitSupervoxel(raster, x, y);
    if (sv < 0) return;
    const current = this.staged.get(sv) ?? raster.predicted[String(sv)] ?? 0;
    this.staged.set(sv, (current + 1) % nClasses);
  }

  pending(): Map<number, number> {
    return new Map(this.staged);
  }

  reset(): void {
    this.staged.clear();
  }

  /** Corrections submit; an empty list is valid (accept all predictions). */
  annotation(queryId: number): AnnotateBody {
    return {
      query_id: queryId,
      corrections: [...this.staged.entries()].map(([supervoxel_id, cls]) => ({
        supervoxel_id,
        cls,
      })),
    };
  }
}
