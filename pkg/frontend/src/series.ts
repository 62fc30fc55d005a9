/**
 * Series selection: turns a parsed result table into the exact series a
 * figure draws.
 *
 * Figures plot the aggregate rows the harness already wrote (mean curves
 * with one-std bands), never statistics computed here: the plotted values
 * are the CSV's aggregate values, verbatim. Power-swept kinds put
 * transmit power on the x axis with one series per refinement pass;
 * tracking puts the fading-block index on x and burst runs put the pass
 * index on x, one series per transmit power.
 */

import type { ExperimentKind, ResultRow, ResultTable } from "./schema.js";

export interface Series {
  label: string;
  x: number[];
  mean: number[];
  std: number[];
}

export interface PanelData {
  metric: "nmse" | "ber";
  xLabel: string;
  yLabel: string;
  logY: boolean;
  series: Series[];
}

export interface FigureData {
  kind: ExperimentKind;
  panels: PanelData[];
}

const POWER_SWEPT: ExperimentKind[] = [
  "icce_nmse_ber",
  "performance_limit",
  "formula_sweep",
];

const METRIC_FIELD = {
  nmse: "nmseCascaded",
  ber: "ber",
} as const;

function aggregateKey(row: ResultRow): string {
  return `${row.pTDbm}|${row.beta}`;
}

function sortedUnique(values: number[]): number[] {
  return [...new Set(values)].sort((a, b) => a - b);
}

/**
 * Build one series from matched mean/std rows, keeping only points whose
 * mean is finite (pilot-pass BER is NaN by design and stays unplotted).
 */
function buildSeries(label: string, points: Array<{
  x: number; mean: number; std: number;
}>): Series | null {
  const kept = points.filter((p) => Number.isFinite(p.mean));
  if (kept.length === 0) {
    return null;
  }
  return {
    label,
    x: kept.map((p) => p.x),
    mean: kept.map((p) => p.mean),
    std: kept.map((p) => (Number.isFinite(p.std) ? p.std : 0)),
  };
}

function collectSeries(
  table: ResultTable,
  metric: keyof typeof METRIC_FIELD,
  groupBy: "beta" | "power",
  labelFor: (group: number) => string,
): Series[] {
  const field = METRIC_FIELD[metric];
  const stdByKey = new Map<string, ResultRow>();
  for (const row of table.stds) {
    stdByKey.set(aggregateKey(row), row);
  }
  const groups = sortedUnique(
    table.means.map((r) => (groupBy === "beta" ? r.beta : r.pTDbm)));
  const series: Series[] = [];
  for (const group of groups) {
    const rows = table.means.filter((r) =>
      (groupBy === "beta" ? r.beta : r.pTDbm) === group);
    rows.sort((a, b) =>
      groupBy === "beta" ? a.pTDbm - b.pTDbm : a.beta - b.beta);
    const points = rows.map((row) => {
      const std = stdByKey.get(aggregateKey(row));
      return {
        x: groupBy === "beta" ? row.pTDbm : row.beta,
        mean: row[field],
        std: std ? std[field] : NaN,
      };
    });
    const built = buildSeries(labelFor(group), points);
    if (built !== null) {
      series.push(built);
    }
  }
  return series;
}

/** Assemble both panels (NMSE left, BER right) for an experiment kind. */
export function figureData(kind: ExperimentKind,
                           table: ResultTable): FigureData {
  if (table.means.length === 0) {
    throw new Error(
      `empty sweep: ${table.path} holds no aggregate rows to plot`);
  }
  const powerSwept = POWER_SWEPT.includes(kind);
  const groupBy = powerSwept ? "beta" : "power";
  const xLabel = powerSwept
    ? "P_T (dBm)"
    : kind === "ict_tracking" ? "fading block" : "refinement pass";
  const labelFor = powerSwept
    ? (beta: number) =>
        kind === "performance_limit" ? `genie pass ${beta}` : `pass ${beta}`
    : (power: number) => `P_T ${power} dBm`;

  const panels: PanelData[] = [];
  for (const metric of ["nmse", "ber"] as const) {
    const series = collectSeries(table, metric, groupBy, labelFor);
    panels.push({
      metric,
      xLabel,
      yLabel: metric === "nmse" ? "cascaded NMSE" : "coded BER",
      logY: true,
      series,
    });
  }
  if (panels.every((p) => p.series.length === 0)) {
    throw new Error(
      `empty sweep: ${table.path} has no finite aggregate values`);
  }
  return { kind, panels };
}
