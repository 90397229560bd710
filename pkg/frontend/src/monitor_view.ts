/**
 * Live monitor: glob-filtered channel table fed by the change stream.
 *
 * Rows update in place and only ever forward: a delta whose seq is not
 * greater than the row's current seq is dropped, so replays or reordered
 * frames can never roll a value back. Setpoint cells are editable; a
 * rejected write (limit or type) shows the error and restores the cell.
 * The stream reconnects with backoff until unmounted.
 */

import { ApiClient, ApiError } from "./api.js";
import type { ChannelRecord } from "./types.js";

const RECONNECT_MIN_MS = 1000;
const RECONNECT_MAX_MS = 15000;

interface Row {
  record: ChannelRecord;
  tr: HTMLTableRowElement;
  value: HTMLTableCellElement;
  input: HTMLInputElement | null;
  seqCell: HTMLTableCellElement;
}

export class MonitorView {
  private rows = new Map<string, Row>();
  private abort: AbortController | null = null;
  private backoffMs = RECONNECT_MIN_MS;
  private unmounted = false;

  private readonly pattern = document.createElement("input");
  private readonly status = document.createElement("div");
  private readonly error = document.createElement("div");
  private readonly table = document.createElement("table");
  private readonly tbody = document.createElement("tbody");

  constructor(
    private readonly root: HTMLElement,
    private readonly api: ApiClient,
  ) {}

  mount(initialPattern = "**"): void {
    this.pattern.value = initialPattern;
    const watch = document.createElement("button");
    watch.textContent = "watch";
    watch.addEventListener("click", () => this.resubscribe());
    this.pattern.addEventListener("keydown", (e) => {
      if (e.key === "Enter") this.resubscribe();
    });

    const bar = document.createElement("div");
    bar.className = "monitor-bar";
    bar.append(this.pattern, watch, this.status);
    this.error.className = "error-box";
    this.table.className = "results";
    const head = this.table.createTHead().insertRow();
    for (const h of ["channel", "value", "units", "quality", "seq"]) {
      const th = document.createElement("th");
      th.textContent = h;
      head.append(th);
    }
    this.table.append(this.tbody);
    this.root.append(bar, this.error, this.table);
    this.resubscribe();
  }

  unmount(): void {
    this.unmounted = true;
    this.abort?.abort();
  }

  private resubscribe(): void {
    this.abort?.abort();
    this.abort = new AbortController();
    this.rows.clear();
    this.tbody.textContent = "";
    this.error.textContent = "";
    this.backoffMs = RECONNECT_MIN_MS;
    void this.connect(this.pattern.value, this.abort.signal);
  }

  private async connect(pattern: string, signal: AbortSignal): Promise<void> {
    for (;;) {
      if (signal.aborted || this.unmounted) return;
      try {
        this.status.textContent = "connecting";
        const streaming = this.api.streamChannels(
          pattern,
          {
            onOpen: () => {
              this.status.textContent = "live";
              this.backoffMs = RECONNECT_MIN_MS;
              // late list fill: the seq guard reconciles it with any
              // deltas that arrived first
              void this.api
                .channels(pattern)
                .then((recs) => recs.forEach((r) => this.apply(r)))
                .catch(() => undefined);
            },
            onRecord: (rec) => this.apply(rec),
            onOverflow: (err) => {
              this.error.textContent = `[${err.code}] ${err.message}`;
            },
          },
          signal,
        );
        await streaming;
      } catch (err) {
        if (signal.aborted || this.unmounted) return;
        if (err instanceof ApiError && err.status === 400) {
          // bad pattern: report and stop, retrying cannot help
          this.error.textContent = `[${err.code}] ${err.message}`;
          this.status.textContent = "stopped";
          return;
        }
      }
      if (signal.aborted || this.unmounted) return;
      this.status.textContent = "reconnecting";
      await sleep(this.backoffMs);
      this.backoffMs = Math.min(this.backoffMs * 2, RECONNECT_MAX_MS);
    }
  }

  /** Seq-ordered upsert; stale or duplicate deltas are ignored. */
  apply(rec: ChannelRecord): void {
    const existing = this.rows.get(rec.name);
    if (existing) {
      if (rec.seq <= existing.record.seq) return;
      existing.record = rec;
      this.renderRow(existing);
      return;
    }
    const tr = this.tbody.insertRow();
    const name = tr.insertCell();
    name.textContent = rec.name;
    const value = tr.insertCell();
    const units = tr.insertCell();
    units.textContent = rec.units;
    const quality = tr.insertCell();
    const seqCell = tr.insertCell();

    let input: HTMLInputElement | null = null;
    if (rec.role === "setpoint" && (rec.kind === "float64" || rec.kind === "int64")) {
      input = document.createElement("input");
      input.className = "setpoint";
      input.addEventListener("change", () => void this.submit(rec.name));
      value.append(input);
    }
    quality.textContent = rec.quality;
    const row: Row = { record: rec, tr, value, input, seqCell };
    this.rows.set(rec.name, row);
    this.renderRow(row);
  }

  private renderRow(row: Row): void {
    const rec = row.record;
    if (row.input) row.input.value = String(rec.value);
    else row.value.textContent = String(rec.value);
    row.seqCell.textContent = String(rec.seq);
    row.tr.className = `quality-${rec.quality}`;
    const qualityCell = row.tr.cells[3];
    if (qualityCell) qualityCell.textContent = rec.quality;
  }

  private async submit(name: string): Promise<void> {
    const row = this.rows.get(name);
    if (!row || !row.input) return;
    const raw = row.input.value;
    const value = row.record.kind === "int64" ? parseInt(raw, 10) : Number(raw);
    try {
      await this.api.setChannel(name, Number.isNaN(value) ? raw : value);
      this.error.textContent = "";
    } catch (err) {
      if (err instanceof ApiError) {
        this.error.textContent = `[${err.code}] ${err.message}`;
      }
      row.input.value = String(row.record.value); // cell unchanged on reject
    }
  }

  recordOf(name: string): ChannelRecord | undefined {
    return this.rows.get(name)?.record;
  }
}

function sleep(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}
