#!/usr/bin/env node
/** CLI: render --in summary.csv --kind {errorbar,quantile} --out fig.svg [--logy]
 *
 * Reads a harness summary CSV and writes a deterministic SVG figure. All
 * statistics come from the CSV; nothing is recomputed here.
 */

import { readFileSync, writeFileSync } from "node:fs";

import { parseSummaryCsv, SchemaError } from "./csv.js";
import { FigureKind, renderFigure } from "./figure.js";

interface Args {
  input: string;
  kind: FigureKind;
  out: string;
  logY: boolean;
  title?: string;
}

function parseArgs(argv: string[]): Args {
  let input: string | undefined;
  let kind: string | undefined;
  let out: string | undefined;
  let logY = false;
  let title: string | undefined;
  for (let i = 0; i < argv.length; i++) {
    const arg = argv[i];
    const next = () => {
      const v = argv[++i];
      if (v === undefined) throw new Error(`missing value for ${arg}`);
      return v;
    };
    switch (arg) {
      case "--in":
        input = next();
        break;
      case "--kind":
        kind = next();
        break;
      case "--out":
        out = next();
        break;
      case "--logy":
        logY = true;
        break;
      case "--title":
        title = next();
        break;
      default:
        throw new Error(`unknown argument ${arg}`);
    }
  }
  if (!input || !out) throw new Error("--in and --out are required");
  if (kind !== "errorbar" && kind !== "quantile") {
    throw new Error(`--kind must be errorbar or quantile, got ${kind ?? "(none)"}`);
  }
  return { input, kind, out, logY, title };
}

export function main(argv: string[]): number {
  try {
    const args = parseArgs(argv);
    const table = parseSummaryCsv(readFileSync(args.input, "utf8"));
    const svg = renderFigure(table, { kind: args.kind, logY: args.logY, title: args.title });
    writeFileSync(args.out, svg, "utf8");
    console.log(`wrote ${args.out}`);
    return 0;
  } catch (err) {
    const prefix = err instanceof SchemaError ? "schema error" : "error";
    console.error(`${prefix}: ${err instanceof Error ? err.message : err}`);
    return 1;
  }
}

if (process.argv[1] && /render\.(ts|js)$/.test(process.argv[1])) {
  process.exit(main(process.argv.slice(2)));
}
