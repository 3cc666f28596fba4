/**
 * Chart rendering: four SVG files per comparison, one per metric, with the
 * truth cardinality overlaid as a step line on the cardinality chart.
 *
 * echarts runs in SSR mode, so output is a pure function of the inputs.
 */

import { mkdirSync, writeFileSync } from "node:fs";
import { join } from "node:path";
import * as echarts from "echarts";

import { RunSeries } from "./schema.js";

const PALETTE = ["#c0392b", "#2471a3", "#1e8449", "#9b59b6", "#d68910", "#5d6d7e"];

interface MetricSpec {
  key: "mean_est_n" | "mean_ospa" | "mean_miscls" | "mean_jpm";
  suffix: string;
  title: string;
  yLabel: string;
}

export const METRICS: MetricSpec[] = [
  { key: "mean_est_n", suffix: "cardinality", title: "Cardinality estimate", yLabel: "mean estimated targets" },
  { key: "mean_ospa", suffix: "ospa", title: "OSPA distance", yLabel: "OSPA (m)" },
  { key: "mean_miscls", suffix: "miscls", title: "Probability of incorrect classification", yLabel: "misclassification rate" },
  { key: "mean_jpm", suffix: "jpm", title: "Joint performance metric", yLabel: "JPM" },
];

function renderMetric(runs: RunSeries[], metric: MetricSpec): string {
  const scans = runs[0].rows.map((row) => String(row.scan));
  const series: echarts.SeriesOption[] = [];
  if (metric.key === "mean_est_n") {
    series.push({
      name: "truth",
      type: "line",
      step: "middle",
      symbol: "none",
      lineStyle: { color: "#333", type: "dashed", width: 1.5 },
      itemStyle: { color: "#333" },
      data: runs[0].rows.map((row) => row.true_n),
    });
  }
  runs.forEach((run, i) => {
    series.push({
      name: run.label,
      type: "line",
      symbol: "circle",
      symbolSize: 4,
      lineStyle: { color: PALETTE[i % PALETTE.length] },
      itemStyle: { color: PALETTE[i % PALETTE.length] },
      data: run.rows.map((row) => row[metric.key]),
    });
  });
  const chart = echarts.init(null, null, { renderer: "svg", ssr: true, width: 720, height: 420 });
  chart.setOption({
    animation: false,
    title: { text: metric.title, left: "center", textStyle: { fontSize: 14 } },
    legend: { bottom: 0, data: series.map((s) => s.name as string) },
    grid: { left: 60, right: 20, top: 40, bottom: 60 },
    xAxis: { type: "category", name: "scan", nameLocation: "middle", nameGap: 26, data: scans },
    yAxis: { type: "value", name: metric.yLabel, nameLocation: "middle", nameGap: 42 },
    series,
  });
  const svg = chart.renderToSVGString();
  chart.dispose();
  return normalizeSvg(svg);
}

/** Renumber zrender's process-global id tokens so output depends only on inputs. */
function normalizeSvg(svg: string): string {
  const seen = new Map<string, string>();
  return svg.replace(/zr\d+-(cls-|c)(\d+)/g, (token, kind) => {
    let name = seen.get(token);
    if (name === undefined) {
      name = `zr0-${kind}${seen.size}`;
      seen.set(token, name);
    }
    return name;
  });
}

/** Render the four comparison charts into outDir; returns the written paths. */
export function plotComparison(runs: RunSeries[], outDir: string, stem = "comparison"): string[] {
  mkdirSync(outDir, { recursive: true });
  const written: string[] = [];
  for (const metric of METRICS) {
    const target = join(outDir, `${stem}_${metric.suffix}.svg`);
    writeFileSync(target, renderMetric(runs, metric));
    written.push(target);
  }
  return written;
}
