/**
 * Plot specification: the single JSON file the CLI consumes.
 *
 * A spec names one result CSV, the experiment kind that produced it, and
 * the output SVG path. Everything else is optional. Validation failures
 * name the offending field and the allowed values.
 */

import { existsSync, readFileSync } from "fs";
import { dirname, resolve } from "path";

import { EXPERIMENT_KINDS, type ExperimentKind } from "./schema.js";

export interface PlotSpec {
  kind: ExperimentKind;
  csv: string;
  sidecar: string;
  out: string;
  title: string | null;
}

const REQUIRED = ["kind", "csv", "out"] as const;
const OPTIONAL = ["sidecar", "title"] as const;

/** Default sidecar path: the CSV path with its extension swapped to .json. */
export function defaultSidecarPath(csvPath: string): string {
  return csvPath.endsWith(".csv")
    ? csvPath.slice(0, -4) + ".json"
    : csvPath + ".json";
}

/** Validate a raw object into a PlotSpec; paths resolve against baseDir. */
export function validatePlotSpec(raw: unknown, baseDir: string): PlotSpec {
  if (typeof raw !== "object" || raw === null || Array.isArray(raw)) {
    throw new Error("plot spec must be a JSON object");
  }
  const obj = raw as Record<string, unknown>;
  const known = new Set<string>([...REQUIRED, ...OPTIONAL]);
  for (const key of Object.keys(obj)) {
    if (!known.has(key)) {
      throw new Error(
        `plot spec has unknown field ${JSON.stringify(key)}; known fields ` +
        `are [${[...known].join(", ")}]`);
    }
  }
  for (const key of REQUIRED) {
    if (!(key in obj)) {
      throw new Error(`plot spec is missing required field "${key}"`);
    }
  }
  const kind = obj["kind"];
  if (typeof kind !== "string" ||
      !EXPERIMENT_KINDS.includes(kind as ExperimentKind)) {
    throw new Error(
      `plot spec field "kind" must be one of [${EXPERIMENT_KINDS.join(", ")}], ` +
      `got ${JSON.stringify(kind)}`);
  }
  for (const key of ["csv", "out"] as const) {
    if (typeof obj[key] !== "string" || obj[key] === "") {
      throw new Error(`plot spec field "${key}" must be a non-empty string`);
    }
  }
  if ("sidecar" in obj && typeof obj["sidecar"] !== "string") {
    throw new Error(`plot spec field "sidecar" must be a string`);
  }
  if ("title" in obj && typeof obj["title"] !== "string") {
    throw new Error(`plot spec field "title" must be a string`);
  }

  const csv = resolve(baseDir, obj["csv"] as string);
  if (!existsSync(csv)) {
    throw new Error(`plot spec points at a missing CSV: ${csv}`);
  }
  const sidecar = resolve(
    baseDir,
    ("sidecar" in obj ? obj["sidecar"] as string
                      : defaultSidecarPath(obj["csv"] as string)));
  return {
    kind: kind as ExperimentKind,
    csv,
    sidecar,
    out: resolve(baseDir, obj["out"] as string),
    title: "title" in obj ? (obj["title"] as string) : null,
  };
}

/** Load and validate a plot spec file. */
export function loadPlotSpec(path: string): PlotSpec {
  let text: string;
  try {
    text = readFileSync(path, "utf8");
  } catch (err) {
    throw new Error(`cannot read plot spec ${path}: ${String(err)}`);
  }
  let raw: unknown;
  try {
    raw = JSON.parse(text);
  } catch (err) {
    throw new Error(`plot spec ${path} is not valid JSON: ${String(err)}`);
  }
  return validatePlotSpec(raw, dirname(resolve(path)));
}
