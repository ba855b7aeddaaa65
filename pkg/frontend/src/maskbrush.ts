/** Lasso mask: restrict the selected variation to a screen-space region. */

import { ApiClient } from "./api.js";
import { lassoSelect, type Point } from "./mask.js";
import { SessionState } from "./session.js";
import type { OrbitViewer } from "./viewer.js";

export class MaskBrush {
  readonly canvas: HTMLCanvasElement;
  readonly warning: HTMLElement;
  private lasso: Point[] = [];
  private drawing = false;
  onMasked: (variationId: string) => void = () => {};

  constructor(
    private readonly api: ApiClient,
    private readonly session: SessionState,
    private readonly viewer: OrbitViewer,
    container: HTMLElement,
  ) {
    this.canvas = document.createElement("canvas");
    this.canvas.width = viewer.orbit.width;
    this.canvas.height = viewer.orbit.height;
    this.canvas.className = "mask-overlay";
    this.warning = document.createElement("div");
    this.warning.className = "inline-error";
    container.append(this.canvas, this.warning);

    this.canvas.addEventListener("pointerdown", (e) => {
      this.drawing = true;
      this.lasso = [this.canvasPoint(e)];
    });
    this.canvas.addEventListener("pointermove", (e) => {
      if (!this.drawing) return;
      this.lasso.push(this.canvasPoint(e));
      this.draw();
    });
    this.canvas.addEventListener("pointerup", () => {
      this.drawing = false;
      void this.commit(this.lasso);
    });
  }

  private canvasPoint(e: PointerEvent): Point {
    const rect = this.canvas.getBoundingClientRect();
    return {
      x: ((e.clientX - rect.left) * this.canvas.width) / rect.width,
      y: ((e.clientY - rect.top) * this.canvas.height) / rect.height,
    };
  }

  private draw(): void {
    const ctx = this.canvas.getContext("2d");
    if (!ctx) return;
    ctx.clearRect(0, 0, this.canvas.width, this.canvas.height);
    ctx.strokeStyle = "#ffd34d";
    ctx.beginPath();
    this.lasso.forEach((p, i) => (i === 0 ? ctx.moveTo(p.x, p.y) : ctx.lineTo(p.x, p.y)));
    ctx.closePath();
    ctx.stroke();
  }

  /** Convert the lasso to an index selector and compose(mask).
   *
   * Empty selections are a warning, not a request; exposed for tests. */
  async commit(lasso: Point[]): Promise<string | null> {
    this.warning.textContent = "";
    const sceneId = this.session.sceneId;
    const variationId = this.session.selected;
    if (!sceneId || !variationId) return null;
    const centers = await this.api.projected(sceneId, this.viewer.cameraParam());
    const indices = lassoSelect(centers, lasso);
    if (indices.length === 0) {
      this.warning.textContent = "lasso selected no primitives; nothing sent";
      return null;
    }
    const masked = await this.api.composeMask(variationId, sceneId, indices);
    this.session.addCard({
      variationId: masked.variation_id,
      label: `mask (${indices.length} primitives)`,
      parent: variationId,
      op: "mask",
    });
    this.onMasked(masked.variation_id);
    return masked.variation_id;
  }
}
