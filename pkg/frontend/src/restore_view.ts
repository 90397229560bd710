/**
 * Restore wizard: pick an archived tune, enter the new beam, dry-run,
 * inspect the per-channel diff, then commit.
 *
 * Commit stays disabled until a dry-run for the exact current
 * (tune, beam) pair has returned; editing any beam field or picking
 * another tune revokes it. The velocity warning banner is driven solely
 * by the beta_warning flag in the API report, and every number in the
 * diff (factors, proposed values) is printed from the report verbatim,
 * never recomputed client-side. Committing asks for confirmation that
 * names the number of channels about to be written.
 */

import { ApiClient, ApiError } from "./api.js";
import type { Beam, RestoreReport, TuneRow } from "./types.js";

const ATOMIC_MASS_MEV = 931.494;

/** Display-only velocity estimate for the beam form. */
export function betaOf(energyMevU: number): number {
  const gamma = 1 + energyMevU / ATOMIC_MASS_MEV;
  return Math.sqrt(1 - 1 / (gamma * gamma));
}

function num(idText: string, value: number): HTMLInputElement {
  const input = document.createElement("input");
  input.type = "text";
  input.dataset.field = idText;
  input.value = String(value);
  return input;
}

export class RestoreView {
  private tunes: TuneRow[] = [];
  private selected: TuneRow | null = null;
  private report: RestoreReport | null = null;
  /** The (tune, beam) pair the last dry-run answered for. */
  private dryRunFor: { tuneId: number; beam: Beam } | null = null;
  private committed = false;

  private readonly tuneBox = document.createElement("div");
  private readonly beamBox = document.createElement("div");
  private readonly reportBox = document.createElement("div");
  private readonly error = document.createElement("div");
  private readonly massIn = num("mass_amu", 0);
  private readonly chargeIn = num("charge_state", 0);
  private readonly energyIn = num("energy_mev_u", 0);
  private readonly betaOut = document.createElement("span");
  private readonly dryBtn = document.createElement("button");
  private readonly commitBtn = document.createElement("button");

  constructor(
    private readonly root: HTMLElement,
    private readonly api: ApiClient,
    private readonly confirmFn: (msg: string) => boolean = (msg) => window.confirm(msg),
  ) {}

  async mount(): Promise<void> {
    this.error.className = "error-box";
    this.tuneBox.className = "tune-list";
    this.beamBox.className = "beam-form";
    this.reportBox.className = "restore-report";

    this.dryBtn.textContent = "run dry-run";
    this.dryBtn.addEventListener("click", () => void this.runRestore("dry_run"));
    this.commitBtn.textContent = "commit";
    this.commitBtn.className = "commit";
    this.commitBtn.disabled = true;
    this.commitBtn.addEventListener("click", () => void this.runRestore("commit"));

    for (const input of [this.massIn, this.chargeIn, this.energyIn]) {
      input.addEventListener("input", () => {
        this.revokeDryRun();
        this.updateBeta();
      });
    }
    this.betaOut.className = "beta-readout";

    const form = document.createElement("div");
    form.append(
      labelled("mass (u)", this.massIn),
      labelled("charge", this.chargeIn),
      labelled("energy (MeV/u)", this.energyIn),
      this.betaOut,
      this.dryBtn,
      this.commitBtn,
    );
    this.beamBox.append(form);
    this.root.append(this.tuneBox, this.beamBox, this.error, this.reportBox);
    await this.refreshTunes();
  }

  async refreshTunes(): Promise<void> {
    this.tunes = await this.api.tunes();
    this.tuneBox.textContent = "";
    const table = document.createElement("table");
    table.className = "results";
    const head = table.insertRow();
    for (const h of ["", "id", "label", "archived", "beam", "values"]) {
      const th = document.createElement("th");
      th.textContent = h;
      head.append(th);
    }
    for (const tune of this.tunes) {
      const tr = table.insertRow();
      const pickCell = tr.insertCell();
      const pick = document.createElement("button");
      pick.textContent = "select";
      pick.dataset.tuneId = String(tune.id);
      pick.addEventListener("click", () => this.select(tune));
      pickCell.append(pick);
      tr.insertCell().textContent = String(tune.id);
      tr.insertCell().textContent = tune.label;
      tr.insertCell().textContent = new Date(tune.created_at).toISOString();
      tr.insertCell().textContent =
        `${tune.mass_amu} u, ${tune.charge_state}+, ${tune.energy_mev_u} MeV/u`;
      tr.insertCell().textContent = String(tune.n_values);
    }
    this.tuneBox.append(table);
  }

  select(tune: TuneRow): void {
    this.selected = tune;
    this.massIn.value = String(tune.mass_amu);
    this.chargeIn.value = String(tune.charge_state);
    this.energyIn.value = String(tune.energy_mev_u);
    this.revokeDryRun();
    this.updateBeta();
    this.reportBox.textContent = "";
    this.report = null;
  }

  beamInputs(): Beam | null {
    const mass = Number(this.massIn.value);
    const charge = Number(this.chargeIn.value);
    const energy = Number(this.energyIn.value);
    if (![mass, charge, energy].every((v) => Number.isFinite(v) && v > 0)) return null;
    return { mass_amu: mass, charge_state: charge, energy_mev_u: energy };
  }

  private updateBeta(): void {
    const beam = this.beamInputs();
    this.betaOut.textContent = beam ? `beta = ${betaOf(beam.energy_mev_u).toFixed(4)}` : "";
  }

  private revokeDryRun(): void {
    this.dryRunFor = null;
    this.committed = false;
    this.commitBtn.disabled = true;
  }

  /** Commit is legal only for the pair the last dry-run answered. */
  private commitAllowed(): boolean {
    if (!this.selected || !this.dryRunFor || this.committed) return false;
    const beam = this.beamInputs();
    if (!beam) return false;
    const seen = this.dryRunFor.beam;
    return (
      this.dryRunFor.tuneId === this.selected.id &&
      seen.mass_amu === beam.mass_amu &&
      seen.charge_state === beam.charge_state &&
      seen.energy_mev_u === beam.energy_mev_u
    );
  }

  private async runRestore(mode: "dry_run" | "commit"): Promise<void> {
    if (!this.selected) {
      this.error.textContent = "select a tune first";
      return;
    }
    const beam = this.beamInputs();
    if (!beam) {
      this.error.textContent = "beam fields must be positive numbers";
      return;
    }
    if (mode === "commit") {
      if (!this.commitAllowed()) return;
      const count = this.report ? this.report.entries.length : 0;
      if (!this.confirmFn(`Write ${count} channels to the live database?`)) return;
    }
    try {
      const report = await this.api.restore(this.selected.id, beam, mode);
      this.error.textContent = "";
      this.report = report;
      if (mode === "dry_run") {
        this.dryRunFor = { tuneId: this.selected.id, beam };
        this.committed = false;
      } else {
        this.committed = true;
      }
      this.commitBtn.disabled = !this.commitAllowed();
      this.renderReport(report);
    } catch (err) {
      if (err instanceof ApiError) {
        this.error.textContent = `[${err.code}] ${err.message}`;
      } else {
        this.error.textContent = String(err);
      }
    }
  }

  private renderReport(report: RestoreReport): void {
    this.reportBox.textContent = "";

    if (report.beta_warning) {
      const warn = document.createElement("div");
      warn.className = "beta-warning";
      warn.textContent =
        "WARNING: requested beam exceeds the machine velocity limit (beta > 0.2)";
      this.reportBox.append(warn);
    }

    const summary = document.createElement("div");
    summary.className = "report-summary";
    const f = report.factors;
    summary.textContent =
      `${report.mode}: magnetic ${f.magnetic} electrostatic ${f.electrostatic} ` +
      `rf_amplitude ${f.rf_amplitude} | ${report.entries.length} channels, ` +
      `${report.n_clamped} clamped, ${report.n_applied} applied`;
    this.reportBox.append(summary);

    const table = document.createElement("table");
    table.className = "results";
    const head = table.insertRow();
    for (const h of ["channel", "law", "archived", "factor", "proposed", "clamped", "note"]) {
      const th = document.createElement("th");
      th.textContent = h;
      head.append(th);
    }
    for (const entry of report.entries) {
      const tr = table.insertRow();
      if (entry.clamped) tr.className = "clamped";
      tr.insertCell().textContent = entry.channel;
      tr.insertCell().textContent = entry.scaling_law;
      tr.insertCell().textContent = String(entry.archived_value);
      tr.insertCell().textContent = String(entry.factor);
      tr.insertCell().textContent = String(entry.proposed_value);
      tr.insertCell().textContent = entry.clamped ? "yes" : "";
      tr.insertCell().textContent = entry.note;
    }
    this.reportBox.append(table);
  }

  commitEnabled(): boolean {
    return !this.commitBtn.disabled;
  }
}

function labelled(text: string, control: HTMLElement): HTMLElement {
  const wrap = document.createElement("label");
  wrap.className = "labelled";
  const span = document.createElement("span");
  span.textContent = text;
  wrap.append(span, control);
  return wrap;
}
