#!/usr/bin/env node
/**
 * plot_jdtc: overlay jdtc result CSVs as comparison charts.
 *
 * Usage:
 *   plot_jdtc --csv results/example1_cjde-lmb.csv results/example1_etd.csv \
 *             --labels CJDE-LMB ETD --out figs/
 *
 * Writes four SVG charts (cardinality, OSPA, misclassification, JPM) to the
 * output directory. Exits nonzero with a column diff if a CSV does not match
 * the documented schema.
 */

import { basename } from "node:path";

import { plotComparison } from "./charts.js";
import { RunSeries, SchemaError, checkAligned, parseResultCsv } from "./schema.js";

interface Args {
  csv: string[];
  labels: string[];
  out: string;
  stem: string;
}

export function parseArgs(argv: string[]): Args {
  const args: Args = { csv: [], labels: [], out: "figs", stem: "comparison" };
  let current: "csv" | "labels" | null = null;
  for (let i = 0; i < argv.length; i++) {
    const token = argv[i];
    if (token === "--csv") {
      current = "csv";
    } else if (token === "--labels") {
      current = "labels";
    } else if (token === "--out") {
      current = null;
      args.out = argv[++i] ?? args.out;
    } else if (token === "--stem") {
      current = null;
      args.stem = argv[++i] ?? args.stem;
    } else if (token.startsWith("--")) {
      throw new Error(`unknown flag ${token}`);
    } else if (current) {
      args[current].push(token);
    } else {
      throw new Error(`unexpected argument ${token}`);
    }
  }
  if (args.csv.length === 0) {
    throw new Error("at least one --csv path is required");
  }
  if (args.labels.length > 0 && args.labels.length !== args.csv.length) {
    throw new Error(`got ${args.csv.length} CSVs but ${args.labels.length} labels`);
  }
  return args;
}

export function main(argv: string[]): number {
  let args: Args;
  try {
    args = parseArgs(argv);
  } catch (err) {
    console.error(`usage error: ${(err as Error).message}`);
    return 2;
  }
  try {
    const runs: RunSeries[] = args.csv.map((path, i) =>
      parseResultCsv(path, args.labels[i] ?? basename(path).replace(/\.csv$/, "")),
    );
    checkAligned(runs);
    const written = plotComparison(runs, args.out, args.stem);
    for (const path of written) {
      console.log(path);
    }
    return 0;
  } catch (err) {
    if (err instanceof SchemaError) {
      console.error(`schema error: ${err.message}`);
      return 1;
    }
    console.error(`error: ${(err as Error).message}`);
    return 1;
  }
}

const invokedDirectly =
  process.argv[1] !== undefined && import.meta.url.endsWith(basename(process.argv[1]));
if (invokedDirectly) {
  process.exit(main(process.argv.slice(2)));
}
