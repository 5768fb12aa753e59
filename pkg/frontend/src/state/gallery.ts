/**
 * Model-library view model: one card per checkpoint with its cover image
 * and ranked intent scores. The list renders in exactly the order the API
 * returns the scores (already descending by value).
 */

import { ApiClient } from "../api/client.js";
import type { IntentScore, ModelCard } from "../api/types.js";

export function isDescending(scores: readonly IntentScore[]): boolean {
  for (let i = 1; i < scores.length; i += 1) {
    if (scores[i]!.value > scores[i - 1]!.value) {
      return false;
    }
  }
  return true;
}

export class ModelGallery {
  private models: ModelCard[] = [];
  private selectedStep: number | null = null;

  constructor(
    private readonly client: ApiClient,
    private readonly projectId: string,
  ) {}

  async load(): Promise<ModelCard[]> {
    this.models = await this.client.listModels(this.projectId);
    return this.models;
  }

  cards(): readonly ModelCard[] {
    return this.models;
  }

  select(step: number): ModelCard {
    const card = this.models.find((m) => m.step === step);
    if (card === undefined) {
      throw new Error(`no model at step ${step}`);
    }
    this.selectedStep = step;
    return card;
  }

  selected(): ModelCard | null {
    if (this.selectedStep === null) {
      return null;
    }
    return this.models.find((m) => m.step === this.selectedStep) ?? null;
  }

  /** Score rows for a card, in API order; render order is API order. */
  scoreRows(card: ModelCard): { label: string; value: string }[] {
    return card.intent_scores.map((score) => ({
      label: score.metric_name,
      value: score.value.toFixed(4),
    }));
  }
}
