/**
 * Strategy panel model: the spec returned by the service is shown as an
 * editable JSON document; saving re-validates through the update endpoint
 * and re-renders from the service's response, never from local state.
 */

import { ApiClient } from "../api/client.js";
import { specSchema, type SpecDocument } from "../api/types.js";

export class StrategyParseError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "StrategyParseError";
  }
}

export class StrategyEditor {
  private spec: SpecDocument | null = null;

  constructor(
    private readonly client: ApiClient,
    private readonly projectId: string,
  ) {}

  async load(): Promise<SpecDocument> {
    this.spec = await this.client.getSpec(this.projectId);
    return this.spec;
  }

  current(): SpecDocument | null {
    return this.spec;
  }

  /** The JSON text shown in the editor panel. */
  editorText(): string {
    if (this.spec === null) {
      throw new Error("no strategy loaded");
    }
    return JSON.stringify(this.spec, null, 2);
  }

  /** Parse the edited text locally (shape only) before shipping it to the
   * service, so obvious JSON typos get an inline message without a round
   * trip; semantic validation stays server-side. */
  parseEdit(text: string): SpecDocument {
    let data: unknown;
    try {
      data = JSON.parse(text);
    } catch (error) {
      throw new StrategyParseError(`invalid JSON: ${(error as Error).message}`);
    }
    const parsed = specSchema.safeParse(data);
    if (!parsed.success) {
      throw new StrategyParseError(parsed.error.issues[0]?.message ?? "invalid strategy");
    }
    return parsed.data;
  }

  /** Save an edited document; the stored spec becomes whatever the service
   * validated and echoed back. */
  async save(text: string): Promise<SpecDocument> {
    const edited = this.parseEdit(text);
    this.spec = await this.client.updateSpec(this.projectId, edited);
    return this.spec;
  }
}
