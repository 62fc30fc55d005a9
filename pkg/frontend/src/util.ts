/**
 * Small deterministic helpers: canonical JSON, config hashing, and the
 * number formatting used for SVG coordinates.
 */

import { createHash } from "crypto";

/** JSON with recursively sorted object keys, so hashes are stable. */
export function canonicalJson(value: unknown): string {
  if (value === null || typeof value !== "object") {
    return JSON.stringify(value);
  }
  if (Array.isArray(value)) {
    return "[" + value.map(canonicalJson).join(",") + "]";
  }
  const entries = Object.entries(value as Record<string, unknown>)
    .sort(([a], [b]) => (a < b ? -1 : a > b ? 1 : 0))
    .map(([k, v]) => JSON.stringify(k) + ":" + canonicalJson(v));
  return "{" + entries.join(",") + "}";
}

/** Short hash of the experiment dictionary, shown in figure captions. */
export function configHash(experiment: Record<string, unknown>): string {
  return createHash("sha256")
    .update(canonicalJson(experiment))
    .digest("hex")
    .slice(0, 12);
}

/** Fixed-precision pixel coordinate, with -0 normalised away. */
export function px(value: number): string {
  const rounded = Math.round(value * 100) / 100;
  const safe = Object.is(rounded, -0) ? 0 : rounded;
  return String(safe);
}

/** Escape a string for use in SVG text nodes and attributes. */
export function xmlEscape(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}
