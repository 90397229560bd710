/**
 * Query view: two stacked panes. The top pane picks a table and builds
 * filters/sort/page size; the bottom pane renders the result table with
 * the match count and pagination.
 *
 * Contract: every control change issues exactly one POST /api/query, and
 * only as a structured spec object; no query text is ever assembled here.
 * API errors render inline, keyed by machine code, and the previous
 * results stay on screen.
 */

import { ApiClient, ApiError } from "./api.js";
import type {
  ColumnDef,
  FilterTriple,
  QueryResult,
  QuerySpecBody,
  Scalar,
  TableSchema,
} from "./types.js";

const OPS_BY_TYPE: Record<ColumnDef["type"], string[]> = {
  text: ["eq", "neq", "contains"],
  bool: ["eq", "neq"],
  int: ["eq", "neq", "lt", "le", "gt", "ge"],
  float: ["eq", "neq", "lt", "le", "gt", "ge"],
  timestamp: ["eq", "neq", "lt", "le", "gt", "ge"],
};

const PAGE_SIZES = [10, 25, 50, 100, 250];
const DEFAULT_PAGE_SIZE = 25;

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  cls?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (cls) node.className = cls;
  if (text !== undefined) node.textContent = text;
  return node;
}

function option(value: string, label?: string): HTMLOptionElement {
  const o = el("option");
  o.value = value;
  o.textContent = label ?? value;
  return o;
}

/** One filter line: column dropdown, operator dropdown, literal input. */
class FilterLine {
  readonly node: HTMLElement;
  private readonly column: HTMLSelectElement;
  private readonly op: HTMLSelectElement;
  private readonly literal: HTMLInputElement;

  constructor(columns: ColumnDef[], onRemove: (line: FilterLine) => void) {
    this.node = el("div", "filter-line");
    this.column = el("select");
    this.op = el("select");
    this.literal = el("input");
    this.literal.placeholder = "literal";
    for (const c of columns) this.column.append(option(c.name, `${c.name} (${c.type})`));
    this.columns = columns;
    this.refreshOps();
    this.column.addEventListener("change", () => this.refreshOps());
    const remove = el("button", "remove", "x");
    remove.type = "button";
    remove.addEventListener("click", () => onRemove(this));
    this.node.append(this.column, this.op, this.literal, remove);
  }

  private columns: ColumnDef[];

  private typeOf(name: string): ColumnDef["type"] {
    return this.columns.find((c) => c.name === name)?.type ?? "text";
  }

  private refreshOps(): void {
    const keep = this.op.value;
    this.op.textContent = "";
    for (const op of OPS_BY_TYPE[this.typeOf(this.column.value)]) this.op.append(option(op));
    if ([...this.op.options].some((o) => o.value === keep)) this.op.value = keep;
  }

  /**
   * Literal text is converted to the column's wire type when it parses;
   * otherwise it is sent as the raw string and the server's strict typing
   * answers with TYPE_MISMATCH, which the view shows inline.
   */
  triple(): FilterTriple | null {
    const raw = this.literal.value;
    const type = this.typeOf(this.column.value);
    if (raw === "" && type !== "text") return null; // untouched line
    let lit: Scalar = raw;
    if (type === "int" || type === "timestamp") {
      if (/^[+-]?\d+$/.test(raw.trim())) lit = parseInt(raw, 10);
    } else if (type === "float") {
      const n = Number(raw);
      if (raw.trim() !== "" && Number.isFinite(n)) lit = n;
    } else if (type === "bool") {
      if (raw === "true") lit = true;
      else if (raw === "false") lit = false;
    }
    return [this.column.value, this.op.value, lit];
  }
}

export class QueryView {
  private schemas: TableSchema[] = [];
  private lines: FilterLine[] = [];
  private offset = 0;
  private lastResult: QueryResult | null = null;

  private readonly tableSel = el("select");
  private readonly sortSel = el("select");
  private readonly dirSel = el("select");
  private readonly sizeSel = el("select");
  private readonly linesBox = el("div", "filter-lines");
  private readonly errorBox = el("div", "error-box");
  private readonly statusBox = el("div", "status-line");
  private readonly resultBox = el("div", "result-pane");
  private readonly prevBtn = el("button", "", "prev");
  private readonly nextBtn = el("button", "", "next");

  constructor(
    private readonly root: HTMLElement,
    private readonly api: ApiClient,
  ) {}

  async mount(): Promise<void> {
    this.schemas = await this.api.tables();

    const controls = el("div", "query-controls");
    for (const s of this.schemas) this.tableSel.append(option(s.table));
    this.tableSel.addEventListener("change", () => {
      this.resetForTable();
      void this.runQuery();
    });

    const addBtn = el("button", "", "add filter");
    addBtn.type = "button";
    addBtn.addEventListener("click", () => this.addLine());
    const applyBtn = el("button", "apply", "apply");
    applyBtn.type = "button";
    applyBtn.addEventListener("click", () => {
      this.offset = 0;
      void this.runQuery();
    });

    this.dirSel.append(option("asc"), option("desc"));
    this.sortSel.addEventListener("change", () => {
      this.offset = 0;
      void this.runQuery();
    });
    this.dirSel.addEventListener("change", () => {
      this.offset = 0;
      void this.runQuery();
    });
    for (const n of PAGE_SIZES) this.sizeSel.append(option(String(n)));
    this.sizeSel.value = String(DEFAULT_PAGE_SIZE);
    this.sizeSel.addEventListener("change", () => {
      this.offset = 0;
      void this.runQuery();
    });

    this.prevBtn.addEventListener("click", () => {
      this.offset = Math.max(0, this.offset - this.pageSize());
      void this.runQuery();
    });
    this.nextBtn.addEventListener("click", () => {
      this.offset += this.pageSize();
      void this.runQuery();
    });

    controls.append(
      label("table", this.tableSel),
      this.linesBox,
      addBtn,
      applyBtn,
      label("sort", this.sortSel),
      this.dirSel,
      label("page size", this.sizeSel),
    );
    const pager = el("div", "pager");
    pager.append(this.prevBtn, this.statusBox, this.nextBtn);
    this.root.append(controls, this.errorBox, pager, this.resultBox);

    this.resetForTable();
    await this.runQuery();
  }

  private schema(): TableSchema {
    const s = this.schemas.find((t) => t.table === this.tableSel.value);
    if (!s) throw new Error(`no schema for ${this.tableSel.value}`);
    return s;
  }

  private resetForTable(): void {
    this.lines = [];
    this.linesBox.textContent = "";
    this.offset = 0;
    this.sortSel.textContent = "";
    this.sortSel.append(option("", "(no sort)"));
    for (const c of this.schema().columns) this.sortSel.append(option(c.name));
  }

  private addLine(): void {
    const line = new FilterLine(this.schema().columns, (l) => {
      this.lines = this.lines.filter((x) => x !== l);
      l.node.remove();
    });
    this.lines.push(line);
    this.linesBox.append(line.node);
  }

  private pageSize(): number {
    return parseInt(this.sizeSel.value, 10);
  }

  buildSpec(): QuerySpecBody {
    const spec: QuerySpecBody = {
      table: this.tableSel.value,
      limit: this.pageSize(),
      offset: this.offset,
    };
    const filters = this.lines
      .map((l) => l.triple())
      .filter((t): t is FilterTriple => t !== null);
    if (filters.length) spec.filters = filters;
    if (this.sortSel.value) spec.sort = `${this.sortSel.value}:${this.dirSel.value}`;
    return spec;
  }

  private async runQuery(): Promise<void> {
    try {
      const result = await this.api.query(this.buildSpec());
      this.lastResult = result;
      this.errorBox.textContent = "";
      this.renderResult(result);
    } catch (err) {
      if (err instanceof ApiError) {
        this.errorBox.textContent = `[${err.code}] ${err.message}`;
      } else {
        this.errorBox.textContent = `stream error: ${String(err)}`;
      }
      // previous results stay rendered
    }
  }

  private renderResult(result: QueryResult): void {
    const from = result.rows.length ? this.offset + 1 : 0;
    const to = this.offset + result.rows.length;
    this.statusBox.textContent = `rows ${from} to ${to} of ${result.total_matching}`;
    this.prevBtn.disabled = this.offset === 0;
    this.nextBtn.disabled = to >= result.total_matching;

    const table = el("table", "results");
    const head = el("tr");
    for (const c of result.columns) head.append(el("th", "", c));
    table.append(head);
    for (const row of result.rows) {
      const tr = el("tr");
      for (const cell of row) {
        const td = el("td", cell === null ? "null" : "");
        td.textContent = cell === null ? "" : String(cell);
        tr.append(td);
      }
      table.append(tr);
    }
    this.resultBox.textContent = "";
    this.resultBox.append(table);
  }
}

function label(text: string, control: HTMLElement): HTMLElement {
  const wrap = el("label", "labelled");
  wrap.append(el("span", "", text), control);
  return wrap;
}
