/**
 * Typed HTTP client for the control-stack API.
 *
 * Every non-2xx response carries {code, message}; that surfaces here as an
 * ApiError so views can key their inline messages off the machine code.
 * The change stream is fetch-based (one GET, incremental body parsing) so
 * the same injected fetch function serves both tests and the browser.
 */

import type {
  BeamInfo,
  Beam,
  ChannelRecord,
  DocPage,
  Health,
  QueryResult,
  QuerySpecBody,
  RestoreReport,
  TableSchema,
  TuneRow,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    readonly code: string,
    message: string,
    readonly status: number,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

export type FetchLike = (path: string, init?: RequestInit) => Promise<Response>;

export interface StreamHandlers {
  onRecord: (rec: ChannelRecord) => void;
  onOverflow?: (err: { code: string; message: string }) => void;
  onOpen?: () => void;
}

export class ApiClient {
  constructor(
    private readonly fetchFn: FetchLike = (p, i) => fetch(p, i),
    private readonly base = "",
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const init: RequestInit = { method };
    if (body !== undefined) {
      init.headers = { "content-type": "application/json" };
      init.body = JSON.stringify(body);
    }
    const resp = await this.fetchFn(this.base + path, init);
    const text = await resp.text();
    let parsed: unknown = null;
    let isJson = true;
    try {
      parsed = text ? JSON.parse(text) : null;
    } catch {
      // a proxy error page or similar; fall through to the status check
      isJson = false;
    }
    if (!resp.ok) {
      const err = isJson ? (parsed as { code?: unknown; message?: unknown } | null) : null;
      const code = err && typeof err.code === "string" ? err.code : `HTTP_${resp.status}`;
      const message = err && typeof err.message === "string" ? err.message : text;
      throw new ApiError(code, message, resp.status);
    }
    if (!isJson) {
      throw new ApiError("BAD_RESPONSE", `non-JSON body (HTTP ${resp.status})`, resp.status);
    }
    return parsed as T;
  }

  health(): Promise<Health> {
    return this.request("GET", "/api/health");
  }

  beam(): Promise<BeamInfo> {
    return this.request("GET", "/api/beam");
  }

  tables(): Promise<TableSchema[]> {
    return this.request("GET", "/api/tables");
  }

  query(spec: QuerySpecBody): Promise<QueryResult> {
    return this.request("POST", "/api/query", spec);
  }

  channels(pattern: string): Promise<ChannelRecord[]> {
    return this.request("GET", `/api/channels?pattern=${encodeURIComponent(pattern)}`);
  }

  channel(name: string): Promise<ChannelRecord> {
    return this.request("GET", `/api/channels/${encodeURIComponent(name)}`);
  }

  setChannel(
    name: string,
    value: number | string,
  ): Promise<{ name: string; value: number | string; seq: number; global_version: number }> {
    return this.request("PUT", `/api/channels/${encodeURIComponent(name)}`, { value });
  }

  tunes(): Promise<TuneRow[]> {
    return this.request("GET", "/api/tunes");
  }

  archiveTune(label?: string): Promise<{ id: number }> {
    return this.request("POST", "/api/tunes", label ? { label } : {});
  }

  restore(tuneId: number, beam: Beam, mode: "dry_run" | "commit"): Promise<RestoreReport> {
    return this.request("POST", `/api/tunes/${tuneId}/restore`, { beam, mode });
  }

  takeSnapshot(): Promise<{ id: number }> {
    return this.request("POST", "/api/snapshots");
  }

  docPages(): Promise<string[]> {
    return this.request("GET", "/api/docs");
  }

  docPage(page: string): Promise<DocPage> {
    return this.request("GET", `/api/docs/${encodeURIComponent(page)}`);
  }

  /**
   * Subscribe to the channel change stream. Resolves when the stream ends
   * (server close or overflow), rejects on transport/HTTP failure. Abort
   * via the signal to unsubscribe.
   */
  async streamChannels(
    pattern: string,
    handlers: StreamHandlers,
    signal?: AbortSignal,
  ): Promise<void> {
    const resp = await this.fetchFn(
      this.base + `/api/channels/stream?pattern=${encodeURIComponent(pattern)}`,
      { signal },
    );
    if (!resp.ok) {
      const text = await resp.text();
      let code = `HTTP_${resp.status}`;
      let message = text;
      try {
        const err = JSON.parse(text) as { code?: string; message?: string };
        if (err.code) code = err.code;
        if (err.message) message = err.message;
      } catch {
        // keep transport-level code
      }
      throw new ApiError(code, message, resp.status);
    }
    if (!resp.body) throw new ApiError("NO_BODY", "stream response has no body", resp.status);
    handlers.onOpen?.();

    const reader = resp.body.getReader();
    const decoder = new TextDecoder();
    let buf = "";
    for (;;) {
      const { done, value } = await reader.read();
      if (done) break;
      buf += decoder.decode(value, { stream: true });
      let cut;
      while ((cut = buf.indexOf("\n\n")) >= 0) {
        const frame = buf.slice(0, cut);
        buf = buf.slice(cut + 2);
        this.dispatchFrame(frame, handlers);
      }
    }
  }

  private dispatchFrame(frame: string, handlers: StreamHandlers): void {
    let event = "message";
    const data: string[] = [];
    for (const line of frame.split("\n")) {
      if (line.startsWith(":")) continue; // comment / keepalive
      if (line.startsWith("event:")) event = line.slice(6).trim();
      else if (line.startsWith("data:")) data.push(line.slice(5).trim());
    }
    if (!data.length) return;
    const payload = JSON.parse(data.join("\n"));
    if (event === "overflow") handlers.onOverflow?.(payload);
    else handlers.onRecord(payload as ChannelRecord);
  }
}
