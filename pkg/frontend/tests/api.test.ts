/**
 * ApiClient plumbing: SSE frames must survive arbitrary chunk boundaries,
 * overflow events must reach their handler, and HTTP failures must map to
 * ApiError with the server's error code.
 */

import { describe, expect, it } from "vitest";

import { ApiClient, ApiError } from "../src/api.js";
import type { ChannelRecord } from "../src/types.js";
import { captureFetch, flush, jsonResponse, streamResponse } from "./helpers.js";

const RECORD = {
  name: "MAG:D01:field",
  kind: "float64",
  value: 1.1798,
  units: "T",
  role: "setpoint",
  critical: true,
  quality: "ok",
  seq: 4,
  updated_at: 1786800000123,
  global_version: 210,
};

function streamingClient(): {
  api: ApiClient;
  push: (s: string) => void;
  close: () => void;
} {
  const stream = streamResponse();
  const { fetchFn } = captureFetch(() => stream.resp);
  return { api: new ApiClient(fetchFn), push: stream.push, close: stream.close };
}

describe("stream parsing", () => {
  it("reassembles frames split across chunks", async () => {
    const { api, push } = streamingClient();
    const records: ChannelRecord[] = [];
    void api.streamChannels("**", { onRecord: (r) => records.push(r) });

    const frame = `data: ${JSON.stringify(RECORD)}\n\n`;
    push(": subscribed\n\n");
    push("da");
    push(frame.slice(2, 17));
    push(frame.slice(17));
    await flush();

    expect(records).toHaveLength(1);
    expect(records[0]).toEqual(RECORD);
  });

  it("handles several frames in one chunk", async () => {
    const { api, push } = streamingClient();
    const seqs: number[] = [];
    void api.streamChannels("**", { onRecord: (r) => seqs.push(r.seq) });

    const a = JSON.stringify({ ...RECORD, seq: 1 });
    const b = JSON.stringify({ ...RECORD, seq: 2 });
    push(`data: ${a}\n\ndata: ${b}\n\n: keepalive\n\n`);
    await flush();

    expect(seqs).toEqual([1, 2]);
  });

  it("dispatches overflow to its handler and ends", async () => {
    const { api, push, close } = streamingClient();
    const records: ChannelRecord[] = [];
    let overflowed = false;
    const done = api.streamChannels("**", {
      onRecord: (r) => records.push(r),
      onOverflow: () => {
        overflowed = true;
      },
    });

    push(`data: ${JSON.stringify(RECORD)}\n\n`);
    push('event: overflow\ndata: {"code": "SUBSCRIBER_OVERFLOW"}\n\n');
    close();
    await done;

    expect(records).toHaveLength(1);
    expect(overflowed).toBe(true);
  });

  it("ignores comment keepalives", async () => {
    const { api, push } = streamingClient();
    const records: ChannelRecord[] = [];
    void api.streamChannels("**", { onRecord: (r) => records.push(r) });

    push(": subscribed\n\n: keepalive\n\n: keepalive\n\n");
    await flush();
    expect(records).toHaveLength(0);
  });

  it("raises ApiError for a rejected subscription", async () => {
    const { fetchFn } = captureFetch(() =>
      jsonResponse({ code: "BAD_PATTERN", message: "unmatched bracket" }, 400),
    );
    const api = new ApiClient(fetchFn);
    const err = await api.streamChannels("[", { onRecord: () => {} }).catch((e) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect((err as ApiError).code).toBe("BAD_PATTERN");
    expect((err as ApiError).status).toBe(400);
  });
});

describe("error mapping", () => {
  it("carries the server error code", async () => {
    const { fetchFn } = captureFetch(() =>
      jsonResponse({ code: "UNKNOWN_CHANNEL", message: "no such channel" }, 404),
    );
    const api = new ApiClient(fetchFn);
    const err = await api.channel("NOPE").catch((e) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect((err as ApiError).code).toBe("UNKNOWN_CHANNEL");
    expect((err as ApiError).message).toBe("no such channel");
    expect((err as ApiError).status).toBe(404);
  });

  it("falls back to HTTP_{status} when the body has no code", async () => {
    const { fetchFn } = captureFetch(
      () => new Response("bad gateway", { status: 502, headers: { "content-type": "text/plain" } }),
    );
    const api = new ApiClient(fetchFn);
    const err = await api.health().catch((e) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect((err as ApiError).code).toBe("HTTP_502");
  });

  it("flags non-JSON success bodies", async () => {
    const { fetchFn } = captureFetch(
      () => new Response("<html>proxy</html>", { status: 200, headers: { "content-type": "text/html" } }),
    );
    const api = new ApiClient(fetchFn);
    const err = await api.health().catch((e) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect((err as ApiError).code).toBe("BAD_RESPONSE");
  });

  it("round-trips a successful write", async () => {
    const { fetchFn, calls } = captureFetch(() =>
      jsonResponse({ ...RECORD, value: 1.3, seq: 5, global_version: 211 }),
    );
    const api = new ApiClient(fetchFn);
    const out = await api.setChannel("MAG:D01:field", 1.3);
    expect(out.seq).toBe(5);
    expect(calls[0]!.method).toBe("PUT");
    expect(calls[0]!.path).toBe("/api/channels/MAG%3AD01%3Afield");
    expect(calls[0]!.body).toEqual({ value: 1.3 });
  });
});
