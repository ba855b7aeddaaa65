/** Mix board: blend two variations with a scalar weight or an x-axis ramp. */

import { ApiClient } from "./api.js";
import { InFlightGate } from "./inflight.js";
import { xRamp } from "./ramp.js";
import { SessionState } from "./session.js";
import type { OrbitViewer } from "./viewer.js";

export class MixBoard {
  readonly selectA: HTMLSelectElement;
  readonly selectB: HTMLSelectElement;
  readonly weight: HTMLInputElement;
  readonly rampToggle: HTMLInputElement;
  readonly error: HTMLElement;
  private gate: InFlightGate<string>;

  constructor(
    private readonly api: ApiClient,
    private readonly session: SessionState,
    private readonly viewer: OrbitViewer,
    container: HTMLElement,
  ) {
    this.selectA = document.createElement("select");
    this.selectB = document.createElement("select");
    this.weight = document.createElement("input");
    this.weight.type = "range";
    this.weight.min = "0";
    this.weight.max = "1";
    this.weight.step = "0.05";
    this.weight.value = "0.5";
    this.rampToggle = document.createElement("input");
    this.rampToggle.type = "checkbox";
    this.rampToggle.title = "blend along the screen x-axis";
    this.error = document.createElement("div");
    this.error.className = "inline-error";
    const go = document.createElement("button");
    go.textContent = "Mix";
    container.append(this.selectA, this.selectB, this.weight, this.rampToggle, go, this.error);

    this.gate = new InFlightGate<string>(
      (sceneId) => this.viewer.setScene(sceneId),
      (err) => {
        this.error.textContent = String(err);
      },
    );
    go.addEventListener("click", () => {
      this.gate.request(() =>
        this.mix(this.selectA.value, this.selectB.value, Number(this.weight.value), this.rampToggle.checked),
      );
    });
  }

  refreshOptions(): void {
    for (const sel of [this.selectA, this.selectB]) {
      sel.replaceChildren(
        ...this.session.cards.map((c) => {
          const opt = document.createElement("option");
          opt.value = c.variationId;
          opt.textContent = c.label;
          return opt;
        }),
      );
    }
  }

  /** compose(mix) -> apply; exposed for tests. Returns the new scene id. */
  async mix(aId: string, bId: string, scalarWeight: number, useRamp: boolean): Promise<string> {
    const sceneId = this.session.sceneId;
    if (!sceneId) throw new Error("no scene loaded");
    let weight: number | number[] = scalarWeight;
    if (useRamp) {
      const centers = await this.api.projected(sceneId, this.viewer.cameraParam());
      weight = xRamp(centers, 1, 0);
    }
    const mixed = await this.api.composeMix(aId, bId, weight);
    this.session.addCard({
      variationId: mixed.variation_id,
      label: useRamp ? "mix (x ramp)" : `mix (${scalarWeight.toFixed(2)})`,
      parent: aId,
      op: "mix",
    });
    const applied = await this.api.applyVariation(sceneId, mixed.variation_id);
    return applied.scene_id;
  }
}
