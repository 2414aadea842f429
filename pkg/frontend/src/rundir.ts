/**
 * Run-directory access: manifest checksum validation and CSV parsing.
 *
 * Reports are strictly read-only consumers of the documented formats
 * (trajectory.csv / rates.csv / manifest.json / verify.csv); numbers are
 * quoted verbatim, never recomputed.
 */

import * as fs from "fs";
import * as path from "path";
import { createHash } from "node:crypto";

export interface Manifest {
  version: string;
  config: Record<string, unknown>;
  wallclock_s: number;
  aborted: string | null;
  files: Record<string, string>;
}

export interface Table {
  columns: string[];
  rows: string[][];
}

export class ChecksumError extends Error {}

export function sha256File(file: string): string {
  const h = createHash("sha256");
  h.update(fs.readFileSync(file));
  return h.digest("hex");
}

export function loadManifest(runDir: string): Manifest {
  const file = path.join(runDir, "manifest.json");
  if (!fs.existsSync(file)) {
    throw new ChecksumError(`no manifest.json in ${runDir}`);
  }
  const manifest = JSON.parse(fs.readFileSync(file, "utf8")) as Manifest;
  for (const [name, digest] of Object.entries(manifest.files)) {
    const target = path.join(runDir, name);
    if (!fs.existsSync(target)) {
      throw new ChecksumError(`declared artifact missing: ${name}`);
    }
    const actual = sha256File(target);
    if (actual !== digest) {
      throw new ChecksumError(`checksum mismatch for ${name}`);
    }
  }
  return manifest;
}

/** Plain numeric CSV (our own format: no quoting, header row first). */
export function parseCsv(text: string): Table {
  const lines = text.split("\n").filter((l) => l.trim().length > 0);
  const columns = lines[0].split(",");
  const rows = lines.slice(1).map((l) => l.split(","));
  return { columns, rows };
}

export function readCsv(runDir: string, name: string): Table {
  const file = path.join(runDir, name);
  if (!fs.existsSync(file)) {
    throw new Error(`missing ${name} in ${runDir}`);
  }
  return parseCsv(fs.readFileSync(file, "utf8"));
}

export function column(table: Table, name: string): number[] {
  const j = table.columns.indexOf(name);
  if (j < 0) throw new Error(`missing column ${name}`);
  return table.rows.map((r) => Number(r[j]));
}

export interface RunView {
  dir: string;
  manifest: Manifest;
  trajectory: Table;
  rates: Table;
  verifyText: string | null;
}

export function loadRun(runDir: string, verifyPath?: string): RunView {
  const manifest = loadManifest(runDir);
  const trajectory = readCsv(runDir, "trajectory.csv");
  const rates = readCsv(runDir, "rates.csv");
  let verifyText: string | null = null;
  const candidate = verifyPath ?? path.join(runDir, "verify.csv");
  if (fs.existsSync(candidate)) {
    verifyText = fs.readFileSync(candidate, "utf8");
  }
  return { dir: runDir, manifest, trajectory, rates, verifyText };
}
