/** Route-table mock for the injectable fetch used by ApiClient. */

import type { FetchLike } from "../src/api/client.js";

export interface RecordedRequest {
  method: string;
  url: string;
  body: unknown;
}

export type Handler = (request: RecordedRequest) => {
  status?: number;
  body: unknown;
};

export function mockFetch(
  routes: Record<string, Handler>,
): { fetchFn: FetchLike; requests: RecordedRequest[] } {
  const requests: RecordedRequest[] = [];
  const fetchFn: FetchLike = async (url, init) => {
    const method = init?.method ?? "GET";
    const request: RecordedRequest = {
      method,
      url,
      body:
        typeof init?.body === "string" ? JSON.parse(init.body) : undefined,
    };
    requests.push(request);
    const key = `${method} ${url.split("?")[0]}`;
    const handler = routes[key];
    if (handler === undefined) {
      throw new Error(`unhandled route: ${key}`);
    }
    const { status = 200, body } = handler(request);
    return new Response(JSON.stringify(body), {
      status,
      headers: { "Content-Type": "application/json" },
    });
  };
  return { fetchFn, requests };
}
