/**
 * ddfmcw-plots render --spec <json> --out <dir>
 *
 * The spec file holds either one figure spec object or an array of them.
 * Input CSV paths are resolved relative to the spec file's directory.
 */

import { existsSync, mkdirSync, writeFileSync } from "node:fs";
import { dirname, isAbsolute, join, resolve } from "node:path";

import { renderFigure } from "./figures.js";
import { FigureSpec, loadFigureSpec, parseFigureSpec } from "./spec.js";
import { readFileSync } from "node:fs";

function usage(): never {
  console.error("usage: ddfmcw-plots render --spec <figures.json> --out <dir>");
  process.exit(2);
}

export function main(argv: string[]): number {
  if (argv[0] !== "render") usage();
  let specPath = "";
  let outDir = "";
  for (let i = 1; i < argv.length; i += 2) {
    if (argv[i] === "--spec") specPath = argv[i + 1] ?? "";
    else if (argv[i] === "--out") outDir = argv[i + 1] ?? "";
    else usage();
  }
  if (!specPath || !outDir) usage();

  let specs: FigureSpec[];
  try {
    const doc = JSON.parse(readFileSync(specPath, "utf8"));
    specs = Array.isArray(doc) ? doc.map(parseFigureSpec) : [loadFigureSpecObject(doc)];
  } catch (err) {
    console.error(`spec error: ${(err as Error).message}`);
    return 2;
  }

  const base = dirname(resolve(specPath));
  mkdirSync(outDir, { recursive: true });
  try {
    for (const spec of specs) {
      const resolved: FigureSpec = {
        ...spec,
        inputs: spec.inputs.map((p) => (isAbsolute(p) ? p : join(base, p))),
      };
      for (const input of resolved.inputs) {
        if (!existsSync(input)) {
          throw new Error(`input CSV does not exist: ${input}`);
        }
      }
      const svg = renderFigure(resolved);
      const outPath = join(outDir, spec.output);
      writeFileSync(outPath, svg);
      console.log(outPath);
    }
  } catch (err) {
    console.error(`render error: ${(err as Error).message}`);
    return 1;
  }
  return 0;
}

function loadFigureSpecObject(doc: unknown): FigureSpec {
  return parseFigureSpec(doc);
}

const invokedDirectly = process.argv[1]?.endsWith("cli.js")
  || process.argv[1]?.endsWith("cli.ts");
if (invokedDirectly) {
  process.exit(main(process.argv.slice(2)));
}
