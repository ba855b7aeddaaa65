/** Session state: the scene, view, variation cards, and composition graph.
 * Every id in here exists server-side; the studio never fabricates content. */

import type { OrbitState } from "./camera.js";

export interface VariationCard {
  variationId: string;
  label: string;
  instruction?: string;
  seed?: number;
  /** id of the card this one was derived from, if any */
  parent?: string;
  op?: "edit" | "scale" | "mix" | "mask";
}

export type CompositionNode =
  | { op: "scale"; input: string; w: number }
  | { op: "mix"; a: string; b: string; weight: number | number[] }
  | { op: "mask"; input: string; indices: number[] };

export class SessionState {
  sceneId: string | null = null;
  weightsId: string | null = null;
  orbit: OrbitState = { azimuth: 30, elevation: 20, radius: 4, width: 256, height: 256 };
  cards: VariationCard[] = [];
  selected: string | null = null;

  addCard(card: VariationCard): VariationCard {
    const existing = this.cards.find((c) => c.variationId === card.variationId);
    if (existing) {
      // content addressing: the same inputs produce the same id
      this.selected = existing.variationId;
      return existing;
    }
    this.cards.push(card);
    this.selected = card.variationId;
    return card;
  }

  selectedCard(): VariationCard | null {
    return this.cards.find((c) => c.variationId === this.selected) ?? null;
  }

  /** Walk parents back to the root edit; used to render the derivation chain. */
  lineage(variationId: string): VariationCard[] {
    const byId = new Map(this.cards.map((c) => [c.variationId, c]));
    const chain: VariationCard[] = [];
    const seen = new Set<string>();
    let cur = byId.get(variationId);
    while (cur && !seen.has(cur.variationId)) {
      chain.push(cur);
      seen.add(cur.variationId);
      cur = cur.parent ? byId.get(cur.parent) : undefined;
    }
    return chain.reverse();
  }
}
