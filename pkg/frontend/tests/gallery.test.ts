import { describe, expect, it } from "vitest";

import { ApiClient } from "../src/api/client.js";
import type { ModelCard } from "../src/api/types.js";
import { isDescending, ModelGallery } from "../src/state/gallery.js";
import { mockFetch } from "./mockServer.js";

const MODELS: ModelCard[] = [9, 18, 27].map((step) => ({
  run_id: "r1",
  checkpoint_id: `r1:${step}`,
  step,
  cover_url: `/runs/r1/checkpoints/${step}/cover.png`,
  intent_scores: [
    { metric_name: "stability:overall", value: 0.9 - step / 1000 },
    { metric_name: "stability:face", value: 0.7 },
    { metric_name: "controllability:jacket", value: 0.55 },
  ],
}));

function galleryWithModels(models: ModelCard[]) {
  const { fetchFn } = mockFetch({
    "GET /projects/p1/models": () => ({ body: { models } }),
  });
  return new ModelGallery(new ApiClient("", fetchFn), "p1");
}

describe("model gallery", () => {
  it("shows one card per checkpoint with its cover", async () => {
    const gallery = galleryWithModels(MODELS);
    const cards = await gallery.load();
    expect(cards.map((c) => c.step)).toEqual([9, 18, 27]);
    expect(cards.map((c) => c.cover_url)).toEqual(
      MODELS.map((m) => m.cover_url),
    );
  });

  it("renders intent scores in the API's descending order", async () => {
    const gallery = galleryWithModels(MODELS);
    await gallery.load();
    const card = gallery.select(18);
    expect(isDescending(card.intent_scores)).toBe(true);
    const rows = gallery.scoreRows(card);
    // render order is exactly API order — no client-side re-sorting
    expect(rows.map((r) => r.label)).toEqual(
      card.intent_scores.map((s) => s.metric_name),
    );
    const values = rows.map((r) => Number(r.value));
    expect(values).toEqual([...values].sort((a, b) => b - a));
  });

  it("flags a non-descending score list", () => {
    expect(
      isDescending([
        { metric_name: "a", value: 0.2 },
        { metric_name: "b", value: 0.9 },
      ]),
    ).toBe(false);
  });

  it("selection survives a reload from the API", async () => {
    const gallery = galleryWithModels(MODELS);
    await gallery.load();
    gallery.select(27);
    await gallery.load();
    expect(gallery.selected()?.step).toBe(27);
  });
});
