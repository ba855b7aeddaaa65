/** Intensity slider: w in [0, 2], debounced scale-apply-render round trip.
 *
 * The displayed frame is always a server render of overlay(scene, w * v);
 * w = 0 therefore reproduces the source frame exactly and w = 1 the edit's
 * own render.
 */

import { ApiClient } from "./api.js";
import { debounce, InFlightGate } from "./inflight.js";
import { SessionState } from "./session.js";
import type { OrbitViewer } from "./viewer.js";

export interface SlideOutcome {
  w: number;
  sceneId: string; // scene produced by applying the scaled variation
}

export class IntensitySlider {
  readonly input: HTMLInputElement;
  readonly readout: HTMLElement;
  private gate: InFlightGate<SlideOutcome>;
  private push: (w: number) => void;

  constructor(
    private readonly api: ApiClient,
    private readonly session: SessionState,
    private readonly viewer: OrbitViewer,
    container: HTMLElement,
    debounceMs = 150,
  ) {
    this.input = document.createElement("input");
    this.input.type = "range";
    this.input.min = "0";
    this.input.max = "2";
    this.input.step = "0.05";
    this.input.value = "1";
    this.readout = document.createElement("span");
    this.readout.textContent = "w = 1.00";
    container.append(this.input, this.readout);

    this.gate = new InFlightGate<SlideOutcome>(
      (outcome) => this.viewer.setScene(outcome.sceneId),
      () => {
        this.readout.textContent += " (stale)";
      },
    );
    this.push = debounce((w: number) => {
      this.gate.request(() => this.pipeline(w));
    }, debounceMs);

    this.input.addEventListener("input", () => {
      const w = Number(this.input.value);
      this.readout.textContent = `w = ${w.toFixed(2)}`;
      this.push(w);
    });
  }

  /** scale -> apply; exposed for tests. */
  async pipeline(w: number): Promise<SlideOutcome> {
    const variationId = this.session.selected;
    const sceneId = this.session.sceneId;
    if (!variationId || !sceneId) throw new Error("no variation selected");
    const scaled = await this.api.composeScale(variationId, w);
    const applied = await this.api.applyVariation(sceneId, scaled.variation_id);
    return { w, sceneId: applied.scene_id };
  }

  get dispatched(): number {
    return this.gate.dispatched;
  }
}
