#!/usr/bin/env node
/**
 * msq2-report <run_dir> --out <dir> [--verify <verify.csv>]
 *
 * Reads a completed run directory (checksums validated against the
 * manifest), renders decay/residual SVG plots, and writes summary.md.
 * The pass/fail table inside the summary is the verify table embedded
 * byte-for-byte; all other numbers are quoted from rates.csv verbatim.
 */

import * as fs from "fs";
import * as path from "path";
import { parseArgs } from "node:util";
import { ChecksumError, RunView, column, loadRun } from "./rundir.js";
import { ChartSpec, renderLogLogChart } from "./svg.js";

export interface ReportResult {
  images: string[];
  summary: string;
  incomplete: boolean;
}

function rateRow(view: RunView, name: string): string[] | undefined {
  const j = view.rates.columns.indexOf("name");
  return view.rates.rows.find((r) => r[j] === name);
}

function buildCharts(view: RunView): Record<string, ChartSpec> {
  const t = column(view.trajectory, "t");
  const charts: Record<string, ChartSpec> = {};

  const linf = column(view.trajectory, "linf");
  const slopeRow = rateRow(view, "linf_decay");
  charts["decay_linf"] = {
    title: "sup-norm decay" + (slopeRow ? `  (fitted slope ${Number(slopeRow[4]).toFixed(3)})` : ""),
    series: [{ label: "|u|_inf", t, y: linf, color: "#1360a4" }],
    guides: [{ slope: -1, label: "slope -1" }],
  };

  charts["mass"] = {
    title: "L2 and L3 norms",
    series: [
      { label: "|u|_L2", t, y: column(view.trajectory, "l2"), color: "#1360a4" },
      { label: "|u|_L3", t, y: column(view.trajectory, "l3"), color: "#a45113" },
    ],
  };

  const vlc = column(view.trajectory, "vlc_linf");
  if (vlc.some((v) => v > 0)) {
    const row = rateRow(view, "vfar_linf_slope");
    charts["far_component"] = {
      title: "far-component sup norm" + (row ? `  (slope ${Number(row[4]).toFixed(3)})` : ""),
      series: [{ label: "|v_far|_inf", t, y: vlc, color: "#7b2d8b" }],
      guides: [{ slope: -0.5, label: "slope -1/2" }],
    };
  }

  charts["weighted"] = {
    title: "weighted vector-field norms",
    series: [
      { label: "axis 1", t, y: column(view.trajectory, "weighted_1"), color: "#1360a4" },
      { label: "axis 2", t, y: column(view.trajectory, "weighted_2"), color: "#a45113" },
    ],
  };

  // dissipative limit panel when the run carries the row
  const lim = rateRow(view, "tlogt_limit");
  if (lim) {
    const im = Number((view.manifest.config as { lam_im?: number }).lam_im ?? 1);
    const target = 1 / im;
    const series = t.map((ti, i) => ti * Math.log(ti) * linf[i]);
    charts["dissipative_limit"] = {
      title: `(t log t) |u|_inf  (last ${Number(lim[6]).toFixed(3)}, target ${target.toFixed(2)})`,
      series: [{ label: "(t log t)|u|_inf", t, y: series, color: "#1360a4" }],
      band: { lo: 0.75 * target, hi: 1.25 * target, label: "25% band" },
    };
  }

  return charts;
}

export function buildSummary(view: RunView, images: string[]): { text: string; incomplete: boolean } {
  const cfg = view.manifest.config as Record<string, unknown>;
  const t = column(view.trajectory, "t");
  const tEnd = t[t.length - 1];
  const incomplete =
    view.manifest.aborted !== null || tEnd < Number(cfg.t_max ?? tEnd) * (1 - 1e-9);

  const lines: string[] = [];
  lines.push("# Run report");
  lines.push("");
  lines.push(`- directory: \`${path.basename(view.dir)}\``);
  lines.push(`- code version: ${view.manifest.version}`);
  lines.push(`- lambda: ${cfg.lam_re} + ${cfg.lam_im}i, eps ${cfg.eps}, grid ${cfg.n}^2, box half-length ${cfg.L}`);
  lines.push(`- time span: [${t[0]}, ${tEnd}] over ${t.length} checkpoints`);
  lines.push(`- status: ${incomplete ? "INCOMPLETE" : "complete"}`);
  lines.push("");
  lines.push("## Plots");
  lines.push("");
  for (const img of images) lines.push(`![${img}](${img})`);
  lines.push("");
  lines.push("## Rate table (verbatim from rates.csv)");
  lines.push("");
  lines.push("```csv");
  lines.push(fs.readFileSync(path.join(view.dir, "rates.csv"), "utf8").trimEnd());
  lines.push("```");
  lines.push("");
  if (view.verifyText !== null) {
    lines.push("## Acceptance pass/fail table (byte-identical verify output)");
    lines.push("");
    lines.push("```csv");
    // embedded verbatim: the block content must equal verify.csv exactly
    lines.push(view.verifyText.replace(/\n$/, ""));
    lines.push("```");
    lines.push("");
  }
  return { text: lines.join("\n") + "\n", incomplete };
}

export function generateReport(runDir: string, outDir: string, verifyPath?: string): ReportResult {
  const view = loadRun(runDir, verifyPath);
  fs.mkdirSync(outDir, { recursive: true });
  const charts = buildCharts(view);
  const images: string[] = [];
  for (const [name, spec] of Object.entries(charts)) {
    const file = `${name}.svg`;
    fs.writeFileSync(path.join(outDir, file), renderLogLogChart(spec));
    images.push(file);
  }
  const { text, incomplete } = buildSummary(view, images);
  fs.writeFileSync(path.join(outDir, "summary.md"), text);
  return { images, summary: text, incomplete };
}

function main(): void {
  const { values, positionals } = parseArgs({
    options: {
      out: { type: "string" },
      verify: { type: "string" },
    },
    allowPositionals: true,
  });
  if (positionals.length !== 1 || !values.out) {
    console.error("usage: msq2-report <run_dir> --out <dir> [--verify <verify.csv>]");
    process.exit(2);
  }
  try {
    const res = generateReport(positionals[0], values.out, values.verify);
    console.log(`wrote ${res.images.length} plots and summary.md to ${values.out}`);
    if (res.incomplete) console.log("note: run is marked incomplete");
  } catch (err) {
    if (err instanceof ChecksumError) {
      console.error(`refusing run directory: ${(err as Error).message}`);
      process.exit(3);
    }
    console.error((err as Error).message);
    process.exit(1);
  }
}

const invokedDirectly =
  process.argv[1] !== undefined &&
  import.meta.url === new URL(`file://${path.resolve(process.argv[1])}`).href;
if (invokedDirectly) main();
