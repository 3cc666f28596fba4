export { CSV_COLUMNS, SchemaError, checkAligned, parseResultCsv } from "./schema.js";
export type { RunSeries, ScanRow } from "./schema.js";
export { METRICS, plotComparison } from "./charts.js";
export { main, parseArgs } from "./cli.js";
