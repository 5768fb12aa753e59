/**
 * Training monitor model: long-polls the run's event endpoint, accumulates
 * per-metric series sharing one step axis, and tracks checkpoint covers for
 * the samples strip. The chart is rebuilt purely from accumulated events.
 */

import { ApiClient } from "../api/client.js";
import { isTerminal, type RunEventsPayload } from "../api/types.js";

export interface SeriesPoint {
  step: number;
  value: number;
}

export interface CheckpointEntry {
  step: number;
  coverUrl: string;
}

export type Sleep = (ms: number) => Promise<void>;

const defaultSleep: Sleep = (ms) =>
  new Promise((resolve) => setTimeout(resolve, ms));

export class MonitorModel {
  readonly series = new Map<string, SeriesPoint[]>();
  readonly checkpoints: CheckpointEntry[] = [];
  status = "pending";
  samplePrompt = "";
  private afterStep = 0;

  constructor(
    private readonly client: ApiClient,
    private readonly runId: string,
  ) {}

  get cursor(): number {
    return this.afterStep;
  }

  ingest(payload: RunEventsPayload): void {
    this.status = payload.status;
    for (const event of payload.events) {
      let points = this.series.get(event.metric_name);
      if (points === undefined) {
        points = [];
        this.series.set(event.metric_name, points);
      }
      points.push({ step: event.step, value: event.value });
      this.afterStep = Math.max(this.afterStep, event.step);
    }
    for (const checkpoint of payload.checkpoints) {
      this.checkpoints.push({
        step: checkpoint.step,
        coverUrl: checkpoint.cover_url,
      });
      this.afterStep = Math.max(this.afterStep, checkpoint.step);
    }
  }

  /** One long-poll round; returns true when the run has reached a terminal
   * state and polling should stop. */
  async poll(): Promise<boolean> {
    const payload = await this.client.runEvents(this.runId, this.afterStep);
    this.ingest(payload);
    return isTerminal(this.status);
  }

  /** Poll until the run terminates. */
  async follow(intervalMs = 250, sleep: Sleep = defaultSleep): Promise<void> {
    while (!(await this.poll())) {
      await sleep(intervalMs);
    }
  }

  pointCount(metricName: string): number {
    return this.series.get(metricName)?.length ?? 0;
  }

  totalPoints(): number {
    let total = 0;
    for (const points of this.series.values()) {
      total += points.length;
    }
    return total;
  }

  /** Shared x-axis domain across every series (all series plot on the same
   * coordinate system). */
  stepDomain(): [number, number] | null {
    let min = Infinity;
    let max = -Infinity;
    for (const points of this.series.values()) {
      for (const point of points) {
        min = Math.min(min, point.step);
        max = Math.max(max, point.step);
      }
    }
    return min === Infinity ? null : [min, max];
  }

  async stop(): Promise<string> {
    this.status = await this.client.stopRun(this.runId);
    return this.status;
  }
}
