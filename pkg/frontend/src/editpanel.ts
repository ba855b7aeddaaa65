/** Instruction entry panel: creates labeled variation cards via POST /edits. */

import { ApiClient, ApiError } from "./api.js";
import { SessionState } from "./session.js";

export class EditPanel {
  readonly form: HTMLFormElement;
  readonly error: HTMLElement;
  readonly cardList: HTMLElement;
  onCardSelected: (variationId: string) => void = () => {};

  constructor(
    private readonly api: ApiClient,
    private readonly session: SessionState,
    container: HTMLElement,
  ) {
    this.form = document.createElement("form");
    this.form.innerHTML = `
      <input name="instruction" placeholder="instruction, e.g. make it gold" required>
      <input name="seed" type="number" value="0" title="noise seed">
      <button type="submit">Edit</button>`;
    this.error = document.createElement("div");
    this.error.className = "inline-error";
    this.cardList = document.createElement("div");
    this.cardList.className = "cards";
    container.append(this.form, this.error, this.cardList);

    this.form.addEventListener("submit", (e) => {
      e.preventDefault();
      void this.submit();
    });
  }

  async submit(): Promise<void> {
    this.error.textContent = "";
    if (!this.session.sceneId || !this.session.weightsId) {
      this.error.textContent = "load a scene and select weights first";
      return;
    }
    const data = new FormData(this.form);
    const instruction = String(data.get("instruction") ?? "").trim();
    const seed = Number(data.get("seed") ?? 0);
    try {
      const result = await this.api.edit(
        this.session.sceneId,
        instruction,
        seed,
        this.session.weightsId,
      );
      const before = this.session.cards.length;
      this.session.addCard({
        variationId: result.variation_id,
        label: `${instruction} (seed ${seed})`,
        instruction,
        seed,
        op: "edit",
      });
      if (this.session.cards.length === before) {
        this.error.textContent = "identical edit already exists; reselected it";
      }
      this.renderCards();
    } catch (err) {
      if (err instanceof ApiError && err.status === 422) {
        this.error.textContent = `instruction not supported: ${err.detail}`;
      } else {
        this.error.textContent = String(err);
      }
    }
  }

  renderCards(): void {
    this.cardList.replaceChildren();
    for (const card of this.session.cards) {
      const el = document.createElement("div");
      el.className =
        "card" + (card.variationId === this.session.selected ? " selected" : "");
      const label = document.createElement("div");
      label.textContent = card.label;
      el.append(label);
      if (this.session.sceneId) {
        for (const layer of ["position", "color"]) {
          const thumb = document.createElement("img");
          thumb.width = 64;
          thumb.height = 64;
          thumb.src = this.api.vizUrl(card.variationId, this.session.sceneId, layer);
          el.append(thumb);
        }
      }
      el.addEventListener("click", () => {
        this.session.selected = card.variationId;
        this.renderCards();
        this.onCardSelected(card.variationId);
      });
      this.cardList.append(el);
    }
  }
}
