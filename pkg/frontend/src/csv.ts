/**
 * Readers for the experiment CSV outputs.
 *
 * Two schemas exist: curve files with the columns
 * x,metric,mean,stderr,trials,params_hash and ambiguity surface files with
 * tau_bins,nu_bins,mag_db,params_hash. Values are kept as their original
 * strings alongside the parsed numbers so a rendered figure can embed every
 * plotted value verbatim.
 */

import { readFileSync } from "node:fs";

export interface CurveRow {
  x: number;
  metric: string;
  mean: number;
  stderr: number;
  trials: number;
  paramsHash: string;
  raw: { x: string; mean: string; stderr: string };
}

export interface SurfaceRow {
  tau: number;
  nu: number;
  magDb: number;
  paramsHash: string;
  raw: { tau: string; nu: string; magDb: string };
}

const CURVE_HEADER = "x,metric,mean,stderr,trials,params_hash";
const SURFACE_HEADER = "tau_bins,nu_bins,mag_db,params_hash";

function splitLines(text: string): string[] {
  return text.split(/\r?\n/).filter((line) => line.length > 0);
}

export function readCurveCsv(path: string): CurveRow[] {
  const lines = splitLines(readFileSync(path, "utf8"));
  if (lines[0] !== CURVE_HEADER) {
    throw new Error(`unsupported curve CSV schema in ${path}: header ${JSON.stringify(lines[0])}`);
  }
  return lines.slice(1).map((line, i) => {
    const parts = line.split(",");
    if (parts.length !== 6) {
      throw new Error(`malformed row ${i + 2} in ${path}: ${line}`);
    }
    const [x, metric, mean, stderr, trials, hash] = parts;
    const row: CurveRow = {
      x: Number(x),
      metric,
      mean: Number(mean),
      stderr: Number(stderr),
      trials: Number(trials),
      paramsHash: hash,
      raw: { x, mean, stderr },
    };
    if (!Number.isFinite(row.x) || !Number.isFinite(row.mean)) {
      throw new Error(`non-numeric value at row ${i + 2} in ${path}: ${line}`);
    }
    return row;
  });
}

export function readSurfaceCsv(path: string): SurfaceRow[] {
  const lines = splitLines(readFileSync(path, "utf8"));
  if (lines[0] !== SURFACE_HEADER) {
    throw new Error(`unsupported surface CSV schema in ${path}: header ${JSON.stringify(lines[0])}`);
  }
  return lines.slice(1).map((line, i) => {
    const parts = line.split(",");
    if (parts.length !== 4) {
      throw new Error(`malformed row ${i + 2} in ${path}: ${line}`);
    }
    const [tau, nu, magDb, hash] = parts;
    const row: SurfaceRow = {
      tau: Number(tau),
      nu: Number(nu),
      magDb: Number(magDb),
      paramsHash: hash,
      raw: { tau, nu, magDb },
    };
    if (!Number.isFinite(row.tau) || !Number.isFinite(row.nu) || !Number.isFinite(row.magDb)) {
      throw new Error(`non-numeric value at row ${i + 2} in ${path}: ${line}`);
    }
    return row;
  });
}

/** All distinct params hashes in a set of rows. */
export function hashesOf(rows: Array<{ paramsHash: string }>): Set<string> {
  return new Set(rows.map((r) => r.paramsHash));
}

/**
 * Overlaying curves from different parameter sets is a hard error: a figure
 * must not silently mix incomparable runs.
 */
export function assertConsistentHashes(groups: Array<Set<string>>, context: string): string {
  const all = new Set<string>();
  for (const g of groups) for (const h of g) all.add(h);
  if (all.size !== 1) {
    throw new Error(
      `params-hash mismatch across ${context}: found ${[...all].sort().join(", ")}`,
    );
  }
  return [...all][0];
}

export function groupByMetric(rows: CurveRow[]): Map<string, CurveRow[]> {
  const out = new Map<string, CurveRow[]>();
  for (const row of rows) {
    const list = out.get(row.metric);
    if (list) list.push(row);
    else out.set(row.metric, [row]);
  }
  return out;
}
