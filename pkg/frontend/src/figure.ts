/**
 * Figure assembly: plot-spec in, SVG file out.
 *
 * The CSV and its sidecar are opened read-only and never rewritten. The
 * output file is only created once the figure has fully rendered, so a
 * failed run (schema mismatch, empty sweep) leaves nothing behind.
 */

import { mkdirSync, writeFileSync } from "fs";
import { dirname } from "path";

import type { PlotSpec } from "./plotSpec.js";
import { parseResultCsv, parseSidecar } from "./schema.js";
import { figureData } from "./series.js";
import { renderFigure } from "./svg.js";
import { configHash } from "./util.js";

export interface FigureResult {
  out: string;
  svg: string;
  seriesCount: number;
}

/** Render the figure a plot spec describes and write it to spec.out. */
export function buildFigure(spec: PlotSpec): FigureResult {
  const table = parseResultCsv(spec.csv);
  const sidecar = parseSidecar(spec.sidecar);

  const sidecarKind = sidecar.experiment["kind"];
  if (typeof sidecarKind === "string" && sidecarKind !== spec.kind) {
    throw new Error(
      `kind mismatch: plot spec says ${JSON.stringify(spec.kind)} but the ` +
      `sidecar ${spec.sidecar} records ${JSON.stringify(sidecarKind)}`);
  }

  const data = figureData(spec.kind, table);
  const experimentId =
    table.means[0]?.experimentId ?? table.trials[0]?.experimentId ?? "";
  const svg = renderFigure(data, {
    title: spec.title ?? experimentId,
    experimentId,
    configHash: configHash(sidecar.experiment),
  });

  mkdirSync(dirname(spec.out), { recursive: true });
  writeFileSync(spec.out, svg, "utf8");
  const seriesCount = data.panels.reduce(
    (acc, p) => acc + p.series.length, 0);
  return { out: spec.out, svg, seriesCount };
}
