/**
 * Result-table schema shared with the simulation harness.
 *
 * The harness emits one CSV per experiment: trial rows first, then
 * per-(power, pass) mean and std rows. A JSON sidecar next to the CSV
 * holds the full experiment dictionary. This module parses both and
 * rejects anything that does not match the published schema, with error
 * messages that say exactly what differed.
 */

import { readFileSync } from "fs";

export const CSV_COLUMNS = [
  "row_kind",
  "experiment_id",
  "p_t_dbm",
  "beta",
  "trial_seed",
  "nmse_direct",
  "nmse_cascaded",
  "ber",
  "fer",
] as const;

export const ROW_KINDS = ["trial", "mean", "std"] as const;

export const EXPERIMENT_KINDS = [
  "icce_nmse_ber",
  "ict_tracking",
  "burst_robustness",
  "formula_sweep",
  "performance_limit",
] as const;

export type ExperimentKind = (typeof EXPERIMENT_KINDS)[number];

export interface ResultRow {
  rowKind: "trial" | "mean" | "std";
  experimentId: string;
  pTDbm: number;
  beta: number;
  trialSeed: string;
  nmseDirect: number;
  nmseCascaded: number;
  ber: number;
  fer: number;
}

export interface ResultTable {
  path: string;
  trials: ResultRow[];
  means: ResultRow[];
  stds: ResultRow[];
}

export interface Sidecar {
  experiment: Record<string, unknown>;
  raw: Record<string, unknown>;
}

/** Parse a metric cell: the harness writes "nan" for missing values. */
function parseMetric(cell: string, column: string, line: number,
                     path: string): number {
  if (cell === "nan") {
    return NaN;
  }
  const value = Number(cell);
  if (!Number.isFinite(value)) {
    throw new Error(
      `CSV value error in ${path}:${line}: column ${column} ` +
      `holds ${JSON.stringify(cell)}, expected a number or "nan"`);
  }
  return value;
}

/**
 * Parse a harness result CSV.
 *
 * The header must equal the published column list exactly; a mismatch is
 * reported with both the expected and the found columns.
 */
export function parseResultCsv(path: string): ResultTable {
  const text = readFileSync(path, "utf8");
  const lines = text.split("\n").filter((line) => line.length > 0);
  if (lines.length === 0) {
    throw new Error(`CSV schema mismatch in ${path}: file is empty`);
  }
  const header = (lines[0] ?? "").split(",");
  const expected = CSV_COLUMNS.join(",");
  if (header.join(",") !== expected) {
    throw new Error(
      `CSV schema mismatch in ${path}: expected columns [${expected}], ` +
      `got [${header.join(",")}]`);
  }

  const table: ResultTable = { path, trials: [], means: [], stds: [] };
  for (let i = 1; i < lines.length; i++) {
    const cells = (lines[i] ?? "").split(",");
    if (cells.length !== CSV_COLUMNS.length) {
      throw new Error(
        `CSV shape error in ${path}:${i + 1}: expected ` +
        `${CSV_COLUMNS.length} cells, got ${cells.length}`);
    }
    const rowKind = cells[0] ?? "";
    if (!ROW_KINDS.includes(rowKind as (typeof ROW_KINDS)[number])) {
      throw new Error(
        `CSV value error in ${path}:${i + 1}: row_kind ` +
        `${JSON.stringify(rowKind)} is not one of [${ROW_KINDS.join(", ")}]`);
    }
    const beta = Number(cells[3]);
    if (!Number.isInteger(beta)) {
      throw new Error(
        `CSV value error in ${path}:${i + 1}: beta ` +
        `${JSON.stringify(cells[3])} is not an integer`);
    }
    const row: ResultRow = {
      rowKind: rowKind as ResultRow["rowKind"],
      experimentId: cells[1] ?? "",
      pTDbm: parseMetric(cells[2] ?? "", "p_t_dbm", i + 1, path),
      beta,
      trialSeed: cells[4] ?? "",
      nmseDirect: parseMetric(cells[5] ?? "", "nmse_direct", i + 1, path),
      nmseCascaded: parseMetric(cells[6] ?? "", "nmse_cascaded", i + 1, path),
      ber: parseMetric(cells[7] ?? "", "ber", i + 1, path),
      fer: parseMetric(cells[8] ?? "", "fer", i + 1, path),
    };
    if (row.rowKind === "trial") {
      table.trials.push(row);
    } else if (row.rowKind === "mean") {
      table.means.push(row);
    } else {
      table.stds.push(row);
    }
  }
  return table;
}

/** Load the JSON sidecar the harness writes next to each CSV. */
export function parseSidecar(path: string): Sidecar {
  let text: string;
  try {
    text = readFileSync(path, "utf8");
  } catch (err) {
    throw new Error(
      `sidecar missing: ${path} (the harness writes one JSON sidecar ` +
      `per CSV; pass "sidecar" in the plot spec if it lives elsewhere)`);
  }
  let raw: unknown;
  try {
    raw = JSON.parse(text);
  } catch (err) {
    throw new Error(`sidecar ${path} is not valid JSON: ${String(err)}`);
  }
  if (typeof raw !== "object" || raw === null || Array.isArray(raw)) {
    throw new Error(`sidecar ${path} must hold a JSON object`);
  }
  const obj = raw as Record<string, unknown>;
  const experiment = obj["experiment"];
  if (typeof experiment !== "object" || experiment === null) {
    throw new Error(
      `sidecar ${path} lacks the "experiment" object the harness writes`);
  }
  return { experiment: experiment as Record<string, unknown>, raw: obj };
}
