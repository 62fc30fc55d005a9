#!/usr/bin/env node
/**
 * Figure generator CLI.
 * Usage: plot --spec <file.json>
 *
 * The spec file names one result CSV, the experiment kind that produced
 * it, and the SVG output path. Exit code 0 on success, 1 on any failure;
 * failures are reported on stderr and never leave a partial output file.
 */

import { buildFigure } from "./figure.js";
import { loadPlotSpec } from "./plotSpec.js";

const USAGE = `Usage: plot --spec <file.json>

Options:
  --spec <path>   JSON plot specification (required)
  --help          Show this message

Spec fields:
  kind      one of icce_nmse_ber, ict_tracking, burst_robustness,
            formula_sweep, performance_limit
  csv       result CSV written by the simulation harness
  out       SVG path to write
  sidecar   JSON sidecar path (default: csv with .json extension)
  title     figure title (default: the experiment id)
`;

function main(): void {
  const args = process.argv.slice(2);
  let specPath: string | undefined;

  for (let i = 0; i < args.length; i++) {
    if (args[i] === "--spec" && args[i + 1]) {
      specPath = args[i + 1];
      i++;
    } else if (args[i] === "--help" || args[i] === "-h") {
      console.log(USAGE);
      process.exit(0);
    } else {
      console.error(`unknown argument: ${args[i]}`);
      console.error(USAGE);
      process.exit(1);
    }
  }

  if (!specPath) {
    console.error("missing required --spec argument");
    console.error(USAGE);
    process.exit(1);
  }

  try {
    const spec = loadPlotSpec(specPath);
    const result = buildFigure(spec);
    console.log(
      `wrote ${result.out} (${result.seriesCount} series)`);
  } catch (err) {
    console.error(err instanceof Error ? err.message : String(err));
    process.exit(1);
  }
}

main();
