/** Orbit viewer over server-rendered PNG frames.
 *
 * The studio deliberately does no client-side splatting: what the user sees
 * is byte-for-byte what the engine renders. One request in flight per
 * viewport; drags queue at most one follow-up frame.
 */

import { ApiClient } from "./api.js";
import { encodeOrbit, type OrbitState } from "./camera.js";
import { InFlightGate } from "./inflight.js";

export class OrbitViewer {
  readonly img: HTMLImageElement;
  readonly status: HTMLElement;
  private gate: InFlightGate<Uint8Array>;
  private sceneId: string | null = null;
  private objectUrl: string | null = null;

  constructor(
    private readonly api: ApiClient,
    readonly orbit: OrbitState,
    container: HTMLElement,
  ) {
    this.img = document.createElement("img");
    this.img.width = orbit.width;
    this.img.height = orbit.height;
    this.img.draggable = false;
    this.img.style.cursor = "grab";
    this.status = document.createElement("div");
    this.status.className = "viewer-status";
    container.append(this.img, this.status);
    this.gate = new InFlightGate<Uint8Array>(
      (png) => this.show(png),
      () => {
        // keep the stale frame but make the failure visible
        this.status.textContent = "render failed; frame may be stale";
      },
    );
    this.bindDrag();
  }

  setScene(sceneId: string): void {
    this.sceneId = sceneId;
    this.refresh();
  }

  cameraParam(): string {
    return encodeOrbit(this.orbit);
  }

  refresh(): void {
    if (!this.sceneId) return;
    const scene = this.sceneId;
    const cam = this.cameraParam();
    this.gate.request((signal) => this.api.renderPng(scene, cam, signal));
  }

  private show(png: Uint8Array): void {
    if (this.objectUrl) URL.revokeObjectURL(this.objectUrl);
    const bytes = new Uint8Array(png).buffer as ArrayBuffer;
    this.objectUrl = URL.createObjectURL(new Blob([bytes], { type: "image/png" }));
    this.img.src = this.objectUrl;
    this.status.textContent = "";
  }

  private bindDrag(): void {
    let dragging = false;
    let lastX = 0;
    let lastY = 0;
    this.img.addEventListener("pointerdown", (e) => {
      dragging = true;
      lastX = e.clientX;
      lastY = e.clientY;
    });
    window.addEventListener("pointermove", (e) => {
      if (!dragging) return;
      this.orbit.azimuth = (this.orbit.azimuth + (e.clientX - lastX) * 0.5) % 360;
      this.orbit.elevation = Math.min(
        85,
        Math.max(-85, this.orbit.elevation - (e.clientY - lastY) * 0.5),
      );
      lastX = e.clientX;
      lastY = e.clientY;
      this.refresh();
    });
    window.addEventListener("pointerup", () => {
      dragging = false;
    });
    this.img.addEventListener("wheel", (e) => {
      e.preventDefault();
      this.orbit.radius = Math.min(12, Math.max(1, this.orbit.radius * (e.deltaY > 0 ? 1.1 : 0.9)));
      this.refresh();
    });
  }
}
