/** Wire types, mirroring the API bodies field for field. */

export type Scalar = number | string | boolean | null;

/** [column, operator, literal] */
export type FilterTriple = [string, string, Scalar];

export interface QuerySpecBody {
  table: string;
  filters?: FilterTriple[];
  sort?: string;
  limit: number;
  offset: number;
}

export interface QueryResult {
  columns: string[];
  rows: Scalar[][];
  total_matching: number;
}

export interface ColumnDef {
  name: string;
  type: "text" | "int" | "float" | "timestamp" | "bool";
}

export interface TableSchema {
  table: string;
  columns: ColumnDef[];
}

export interface ChannelRecord {
  name: string;
  kind: string;
  value: number | string;
  units: string;
  role: string;
  critical: boolean;
  quality: string;
  seq: number;
  updated_at: number;
  global_version: number;
}

export interface Beam {
  mass_amu: number;
  charge_state: number;
  energy_mev_u: number;
}

export interface TuneRow {
  id: number;
  label: string;
  created_at: number;
  provenance: string;
  mass_amu: number;
  charge_state: number;
  energy_mev_u: number;
  n_values: number;
}

export interface RestoreEntry {
  channel: string;
  scaling_law: string;
  archived_value: number;
  factor: number;
  proposed_value: number;
  clamped: boolean;
  applied: boolean;
  note: string;
}

export interface RestoreReport {
  tune_id: number;
  old_beam: Beam;
  new_beam: Beam;
  mode: string;
  factors: Record<string, number>;
  beta_warning: boolean;
  n_clamped: number;
  n_applied: number;
  entries: RestoreEntry[];
}

export interface DocPage {
  page: string;
  title: string;
  body: string;
}

export interface BeamInfo {
  beam: Beam;
  gamma: number;
  beta: number;
  pc_total_mev: number;
  rigidity_tm: number;
}

export interface Health {
  status: string;
  store_version: number;
  snapshot_count: number;
  skipped_ticks: number;
}
