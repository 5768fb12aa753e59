/**
 * Thin typed client over the service HTTP API. Every response is parsed
 * through its zod schema; structured error bodies surface as ApiError.
 *
 * The fetch implementation is injectable so tests can run against a mock
 * transport without a server.
 */

import {
  captionEntrySchema,
  errorBodySchema,
  evaluateResultSchema,
  modelCardSchema,
  preprocessSummarySchema,
  runEventsSchema,
  runStatusSchema,
  specSchema,
  type CaptionEntry,
  type EvaluateResult,
  type ModelCard,
  type RegionPayload,
  type RunEventsPayload,
  type RunStatus,
  type SpecDocument,
} from "./types.js";
import { z } from "zod";

export type FetchLike = (
  input: string,
  init?: RequestInit,
) => Promise<Response>;

export class ApiError extends Error {
  constructor(
    readonly code: string,
    message: string,
    readonly detail: unknown,
    readonly status: number,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

export class ApiClient {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(
    method: string,
    path: string,
    schema: z.ZodType<T>,
    body?: unknown,
  ): Promise<T> {
    const response = await this.fetchFn(`${this.baseUrl}${path}`, {
      method,
      headers: body === undefined ? {} : { "Content-Type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    const payload: unknown = await response.json();
    if (!response.ok) {
      const parsed = errorBodySchema.safeParse(payload);
      if (parsed.success) {
        throw new ApiError(
          parsed.data.code,
          parsed.data.message,
          parsed.data.detail,
          response.status,
        );
      }
      throw new ApiError(
        "unexpected_error",
        `request failed with status ${response.status}`,
        payload,
        response.status,
      );
    }
    return schema.parse(payload);
  }

  createProject(name: string): Promise<{ project_id: string; name: string }> {
    return this.request(
      "POST",
      "/projects",
      z.object({ project_id: z.string(), name: z.string() }),
      { name },
    );
  }

  uploadImages(
    projectId: string,
    files: { filename: string; content_base64: string }[],
  ): Promise<string[]> {
    return this.request(
      "POST",
      `/projects/${projectId}/images`,
      z.object({ image_ids: z.array(z.string()) }),
      { files },
    ).then((r) => r.image_ids);
  }

  submitIntent(
    projectId: string,
    text: string,
    regions: RegionPayload[],
    backend = "rule",
  ): Promise<SpecDocument> {
    return this.request("POST", `/projects/${projectId}/intent`, specSchema, {
      text,
      regions,
      backend,
    });
  }

  getSpec(projectId: string): Promise<SpecDocument> {
    return this.request("GET", `/projects/${projectId}/spec`, specSchema);
  }

  updateSpec(projectId: string, spec: SpecDocument): Promise<SpecDocument> {
    return this.request("PUT", `/projects/${projectId}/spec`, specSchema, spec);
  }

  preprocess(projectId: string): Promise<{ folders: Record<string, number> }> {
    return this.request(
      "POST",
      `/projects/${projectId}/preprocess`,
      preprocessSummarySchema,
      {},
    );
  }

  getCaptions(projectId: string): Promise<CaptionEntry[]> {
    return this.request(
      "GET",
      `/projects/${projectId}/captions`,
      z.object({ captions: z.array(captionEntrySchema) }),
    ).then((r) => r.captions);
  }

  putCaption(
    projectId: string,
    path: string,
    caption: string,
  ): Promise<CaptionEntry["caption"]> {
    return this.request(
      "PUT",
      `/projects/${projectId}/captions`,
      z.object({ path: z.string(), caption: z.string() }),
      { path, caption },
    ).then((r) => r.caption);
  }

  propagateCaptionEdit(
    projectId: string,
    find: string,
    replace: string,
    scope = "all",
  ): Promise<number> {
    return this.request(
      "POST",
      `/projects/${projectId}/captions/propagate`,
      z.object({ changed: z.number().int() }),
      { find, replace, scope },
    ).then((r) => r.changed);
  }

  train(
    projectId: string,
    overrides: Record<string, unknown> = {},
  ): Promise<RunStatus> {
    return this.request(
      "POST",
      `/projects/${projectId}/train`,
      runStatusSchema,
      overrides,
    );
  }

  runStatus(runId: string): Promise<RunStatus> {
    return this.request("GET", `/runs/${runId}`, runStatusSchema);
  }

  runEvents(runId: string, afterStep: number): Promise<RunEventsPayload> {
    return this.request(
      "GET",
      `/runs/${runId}/events?after_step=${afterStep}`,
      runEventsSchema,
    );
  }

  stopRun(runId: string): Promise<string> {
    return this.request(
      "POST",
      `/runs/${runId}/stop`,
      z.object({ run_id: z.string(), status: z.string() }),
    ).then((r) => r.status);
  }

  listModels(projectId: string): Promise<ModelCard[]> {
    return this.request(
      "GET",
      `/projects/${projectId}/models`,
      z.object({ models: z.array(modelCardSchema) }),
    ).then((r) => r.models);
  }

  evaluateCheckpoint(
    runId: string,
    step: number,
    body: Record<string, unknown> = {},
  ): Promise<EvaluateResult> {
    return this.request(
      "POST",
      `/runs/${runId}/checkpoints/${step}/evaluate`,
      evaluateResultSchema,
      body,
    );
  }

  generate(
    runId: string,
    step: number,
    prompt: string,
    seed: number,
  ): Promise<string> {
    return this.request(
      "POST",
      `/runs/${runId}/checkpoints/${step}/generate`,
      z.object({ image_base64: z.string() }),
      { prompt, seed },
    ).then((r) => r.image_base64);
  }
}
