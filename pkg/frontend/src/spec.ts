/** Figure specification: what to read, what kind of figure, where to write. */

import { readFileSync } from "node:fs";

export const FIGURE_KINDS = [
  "ccdf",
  "psd",
  "ambiguity",
  "ber",
  "nrmse",
  "chirp-compression",
] as const;

export type FigureKind = (typeof FIGURE_KINDS)[number];

export interface FigureSpec {
  kind: FigureKind;
  inputs: string[];          // CSV paths
  output: string;            // SVG file name
  title?: string;
  xLabel?: string;
  yLabel?: string;
  /** metric-name filter; when present only matching curves are drawn */
  metrics?: string[];
  /** heatmap floor in dB (ambiguity); defaults to -60 */
  floorDb?: number;
  width?: number;
  height?: number;
}

export function parseFigureSpec(doc: unknown): FigureSpec {
  if (typeof doc !== "object" || doc === null) {
    throw new Error("figure spec must be a JSON object");
  }
  const d = doc as Record<string, unknown>;
  const kind = d.kind;
  if (typeof kind !== "string" || !(FIGURE_KINDS as readonly string[]).includes(kind)) {
    throw new Error(`figure kind must be one of ${FIGURE_KINDS.join(", ")}, got ${JSON.stringify(kind)}`);
  }
  const inputs = d.inputs;
  if (!Array.isArray(inputs) || inputs.length === 0 || !inputs.every((p) => typeof p === "string")) {
    throw new Error("inputs must be a non-empty array of CSV paths");
  }
  if (typeof d.output !== "string" || d.output.length === 0) {
    throw new Error("output must be a file name");
  }
  const spec: FigureSpec = {
    kind: kind as FigureKind,
    inputs: inputs as string[],
    output: d.output,
  };
  for (const key of ["title", "xLabel", "yLabel"] as const) {
    if (d[key] !== undefined) {
      if (typeof d[key] !== "string") throw new Error(`${key} must be a string`);
      spec[key] = d[key] as string;
    }
  }
  if (d.metrics !== undefined) {
    if (!Array.isArray(d.metrics) || !d.metrics.every((m) => typeof m === "string")) {
      throw new Error("metrics must be an array of strings");
    }
    spec.metrics = d.metrics as string[];
  }
  for (const key of ["floorDb", "width", "height"] as const) {
    if (d[key] !== undefined) {
      if (typeof d[key] !== "number" || !Number.isFinite(d[key] as number)) {
        throw new Error(`${key} must be a finite number`);
      }
      spec[key] = d[key] as number;
    }
  }
  return spec;
}

export function loadFigureSpec(path: string): FigureSpec {
  return parseFigureSpec(JSON.parse(readFileSync(path, "utf8")));
}
