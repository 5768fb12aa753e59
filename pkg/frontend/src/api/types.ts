/**
 * Wire types for the fine-tuning service, validated with zod so malformed
 * responses fail loudly at the API boundary instead of deep inside a view.
 */

import { z } from "zod";

export const granularitySchema = z.enum(["attribute", "instance", "imagery"]);
export const operationSchema = z.enum(["keep", "modify", "delete"]);
export const domainSchema = z.enum([
  "painting",
  "human_portrait",
  "character_2d",
  "product",
  "other",
]);

export const conceptSchema = z.object({
  name: z.string(),
  granularity: granularitySchema,
  operation: operationSchema,
  region_ids: z.array(z.number().int()),
  opposing_keywords: z.tuple([z.string(), z.string()]).nullable(),
});

export const specSchema = z.object({
  domain: domainSchema,
  trigger_word: z.string(),
  concepts: z.array(conceptSchema),
});

export type SpecDocument = z.infer<typeof specSchema>;
export type ConceptDocument = z.infer<typeof conceptSchema>;

export interface RegionPayload {
  region_id: number;
  image_id: string;
  bbox: [number, number, number, number];
  color_index: number;
}

export const highlightSchema = z.object({
  start: z.number().int(),
  end: z.number().int(),
  concept: z.string(),
});

export const captionEntrySchema = z.object({
  path: z.string(),
  caption: z.string(),
  highlights: z.array(highlightSchema),
});

export type CaptionEntry = z.infer<typeof captionEntrySchema>;

export const preprocessSummarySchema = z.object({
  folders: z.record(z.string(), z.number().int()),
  failures: z.array(z.tuple([z.string(), z.string()])).optional(),
});

export const metricEventSchema = z.object({
  step: z.number().int(),
  metric_name: z.string(),
  concept_name: z.string(),
  value: z.number(),
});

export type MetricEvent = z.infer<typeof metricEventSchema>;

export const runEventsSchema = z.object({
  run_id: z.string(),
  status: z.string(),
  events: z.array(metricEventSchema),
  checkpoints: z.array(
    z.object({ step: z.number().int(), cover_url: z.string() }),
  ),
});

export type RunEventsPayload = z.infer<typeof runEventsSchema>;

export const runStatusSchema = z.object({
  run_id: z.string(),
  status: z.string(),
  error: z.string().nullable(),
  checkpoint_steps: z.array(z.number().int()),
  config: z.record(z.string(), z.unknown()),
});

export type RunStatus = z.infer<typeof runStatusSchema>;

export const intentScoreSchema = z.object({
  metric_name: z.string(),
  value: z.number(),
});

export type IntentScore = z.infer<typeof intentScoreSchema>;

export const modelCardSchema = z.object({
  run_id: z.string(),
  checkpoint_id: z.string(),
  step: z.number().int(),
  cover_url: z.string(),
  intent_scores: z.array(intentScoreSchema),
});

export type ModelCard = z.infer<typeof modelCardSchema>;

export const evaluateResultSchema = z.object({
  images_base64: z.array(z.string()),
  scores: z.array(intentScoreSchema),
});

export type EvaluateResult = z.infer<typeof evaluateResultSchema>;

export const errorBodySchema = z.object({
  code: z.string(),
  message: z.string(),
  detail: z.unknown(),
});

export const TERMINAL_STATUSES = ["finished", "failed", "stopped"] as const;

export function isTerminal(status: string): boolean {
  return (TERMINAL_STATUSES as readonly string[]).includes(status);
}
