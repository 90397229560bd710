/** Shared test plumbing: request-capturing fetch stubs and fixtures. */

import type { FetchLike } from "../src/api.js";
import type { TableSchema } from "../src/types.js";

export interface Captured {
  method: string;
  path: string;
  body: any;
}

export function jsonResponse(body: unknown, status = 200): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "content-type": "application/json" },
  });
}

export function captureFetch(
  handler: (c: Captured) => Response | Promise<Response>,
): { fetchFn: FetchLike; calls: Captured[] } {
  const calls: Captured[] = [];
  const fetchFn: FetchLike = async (path, init) => {
    const call: Captured = {
      method: init?.method ?? "GET",
      path,
      body: init?.body ? JSON.parse(init.body as string) : undefined,
    };
    calls.push(call);
    return handler(call);
  };
  return { fetchFn, calls };
}

/** A text/event-stream response whose bytes the test pushes by hand. */
export function streamResponse(): {
  resp: Response;
  push: (s: string) => void;
  close: () => void;
} {
  let controller!: ReadableStreamDefaultController<Uint8Array>;
  const stream = new ReadableStream<Uint8Array>({
    start(c) {
      controller = c;
    },
  });
  const encoder = new TextEncoder();
  return {
    resp: new Response(stream, {
      status: 200,
      headers: { "content-type": "text/event-stream" },
    }),
    push: (s) => controller.enqueue(encoder.encode(s)),
    close: () => controller.close(),
  };
}

export async function flush(times = 3): Promise<void> {
  for (let i = 0; i < times; i++) {
    await new Promise((resolve) => setTimeout(resolve, 0));
  }
}

export function buttonByText(root: ParentNode, text: string): HTMLButtonElement {
  for (const b of root.querySelectorAll("button")) {
    if (b.textContent === text) return b as HTMLButtonElement;
  }
  throw new Error(`no button labelled ${text}`);
}

export const SCHEMAS: TableSchema[] = [
  {
    table: "cryo_alarms",
    columns: [
      { name: "id", type: "int" },
      { name: "raised_at", type: "timestamp" },
      { name: "sensor", type: "text" },
      { name: "temperature_k", type: "float" },
      { name: "threshold_k", type: "float" },
    ],
  },
  {
    table: "camac_crates",
    columns: [
      { name: "id", type: "int" },
      { name: "crate", type: "int" },
      { name: "description", type: "text" },
      { name: "powered", type: "bool" },
    ],
  },
];
