/**
 * Result CSV schema: parsing and validation.
 *
 * The tool reads exactly the columns the jdtc CLI writes and never
 * recomputes metrics from raw data.
 */

import { readFileSync } from "node:fs";
import Papa from "papaparse";

export const CSV_COLUMNS = [
  "scan",
  "true_n",
  "mean_est_n",
  "mean_ospa",
  "mean_miscls",
  "mean_jpm",
  "trials",
  "failures",
] as const;

export type CsvColumn = (typeof CSV_COLUMNS)[number];

export interface ScanRow {
  scan: number;
  true_n: number;
  mean_est_n: number;
  mean_ospa: number;
  mean_miscls: number;
  mean_jpm: number;
  trials: number;
  failures: number;
}

export interface RunSeries {
  label: string;
  path: string;
  rows: ScanRow[];
}

export class SchemaError extends Error {}

function columnDiff(found: string[]): string {
  const expected = CSV_COLUMNS as readonly string[];
  const missing = expected.filter((c) => !found.includes(c));
  const extra = found.filter((c) => !expected.includes(c));
  const parts = [`expected columns: ${expected.join(",")}`, `found: ${found.join(",")}`];
  if (missing.length > 0) parts.push(`missing: ${missing.join(",")}`);
  if (extra.length > 0) parts.push(`unexpected: ${extra.join(",")}`);
  return parts.join("\n  ");
}

/** Parse one result CSV, rejecting anything that deviates from the schema. */
export function parseResultCsv(path: string, label: string): RunSeries {
  const text = readFileSync(path, "utf8");
  const parsed = Papa.parse<Record<string, string>>(text.trim(), {
    header: true,
    skipEmptyLines: true,
  });
  if (parsed.errors.length > 0) {
    const first = parsed.errors[0];
    throw new SchemaError(`${path}: row ${first.row}: ${first.message}`);
  }
  const found = parsed.meta.fields ?? [];
  const expected = CSV_COLUMNS as readonly string[];
  if (found.length !== expected.length || expected.some((c, i) => found[i] !== c)) {
    throw new SchemaError(`${path}: column mismatch\n  ${columnDiff(found)}`);
  }
  const rows: ScanRow[] = parsed.data.map((record, i) => {
    const row = {} as Record<CsvColumn, number>;
    for (const column of CSV_COLUMNS) {
      const value = Number(record[column]);
      if (!Number.isFinite(value)) {
        throw new SchemaError(`${path}: row ${i + 1}: column ${column} is not numeric (${record[column]})`);
      }
      row[column] = value;
    }
    return row as ScanRow;
  });
  if (rows.length === 0) {
    throw new SchemaError(`${path}: no data rows`);
  }
  return { label, path, rows };
}

/** All runs must cover the same scans so the curves can be overlaid. */
export function checkAligned(runs: RunSeries[]): void {
  const first = runs[0];
  for (const run of runs.slice(1)) {
    if (run.rows.length !== first.rows.length) {
      throw new SchemaError(
        `scan count mismatch: ${first.path} has ${first.rows.length} scans, ` +
          `${run.path} has ${run.rows.length}`,
      );
    }
  }
}
