/**
 * Readers for the two grid CSVs.
 *
 * The run_id column encodes everything a figure needs to group or filter
 * rows (stage, imbalance, sampler pair, schedule, seed), so the per-class
 * file never has to be joined against the summary file.
 */

import fs from "node:fs";
import Papa from "papaparse";

export interface RunKey {
  stage: "joint" | "bis";
  lambda: number;
  beta: number;
  samplerA: string;
  samplerB: string;
  q: number;
  schedule: string | null;
  seed: number;
}

export interface PerClassRow {
  runId: string;
  key: RunKey;
  epoch: number;
  cls: number;
  recall: number;
  precision: number;
  pseudoCount: number;
}

export interface SummaryRow {
  runId: string;
  key: RunKey;
  accuracy: number;
}

export interface RunFilter {
  lambda?: number;
  beta?: number;
  stage?: string;
}

const RUN_ID = new RegExp(
  "^(joint|bis)-lam([^-]+)-beta([^-]+)-(random|mean|reverse)-" +
    "(random|mean|reverse)-q([^-]+)(?:-(equal|linear|cosine|parabolic))?-s(\\d+)$",
);

export function parseRunId(runId: string): RunKey {
  const m = RUN_ID.exec(runId);
  if (!m) {
    throw new Error(`unrecognized run_id: ${runId}`);
  }
  return {
    stage: m[1] as RunKey["stage"],
    lambda: Number(m[2]),
    beta: Number(m[3]),
    samplerA: m[4],
    samplerB: m[5],
    q: Number(m[6]),
    schedule: m[7] ?? null,
    seed: Number(m[8]),
  };
}

/** Legend label for one run configuration (seed left out on purpose). */
export function configLabel(key: RunKey): string {
  if (key.stage === "bis") {
    return `${key.samplerA}>${key.samplerB} ${key.schedule}`;
  }
  return `${key.samplerA}/${key.samplerB}`;
}

export function matchesFilter(key: RunKey, filter: RunFilter): boolean {
  if (filter.lambda !== undefined && key.lambda !== filter.lambda) return false;
  if (filter.beta !== undefined && key.beta !== filter.beta) return false;
  if (filter.stage !== undefined && key.stage !== filter.stage) return false;
  return true;
}

function parseCsv(path: string, required: string[]): Record<string, string>[] {
  const text = fs.readFileSync(path, "utf-8");
  const parsed = Papa.parse<Record<string, string>>(text, {
    header: true,
    skipEmptyLines: true,
  });
  if (parsed.errors.length > 0) {
    const first = parsed.errors[0];
    throw new Error(`${path}: ${first.message} (row ${first.row})`);
  }
  const fields = parsed.meta.fields ?? [];
  for (const col of required) {
    if (!fields.includes(col)) {
      throw new Error(`${path}: missing column ${col}`);
    }
  }
  return parsed.data;
}

function toNumber(raw: string, column: string): number {
  const value = Number(raw);
  if (!Number.isFinite(value)) {
    throw new Error(`non-numeric ${column}: ${raw}`);
  }
  return value;
}

export function readPerClass(path: string, filter: RunFilter): PerClassRow[] {
  const rows = parseCsv(path, [
    "run_id",
    "epoch",
    "class",
    "recall",
    "precision",
    "pseudo_count",
  ]);
  const out: PerClassRow[] = [];
  for (const row of rows) {
    const key = parseRunId(row.run_id);
    if (!matchesFilter(key, filter)) continue;
    out.push({
      runId: row.run_id,
      key,
      epoch: toNumber(row.epoch, "epoch"),
      cls: toNumber(row.class, "class"),
      recall: toNumber(row.recall, "recall"),
      precision: toNumber(row.precision, "precision"),
      pseudoCount: toNumber(row.pseudo_count, "pseudo_count"),
    });
  }
  return out;
}

export function readSummary(path: string, filter: RunFilter): SummaryRow[] {
  const rows = parseCsv(path, ["run_id", "stage", "accuracy", "schedule"]);
  const out: SummaryRow[] = [];
  for (const row of rows) {
    const key = parseRunId(row.run_id);
    if (!matchesFilter(key, filter)) continue;
    out.push({
      runId: row.run_id,
      key,
      accuracy: toNumber(row.accuracy, "accuracy"),
    });
  }
  return out;
}

/** Keep only each run's last epoch (the final evaluation pass). */
export function finalEpochOnly(rows: PerClassRow[]): PerClassRow[] {
  const last = new Map<string, number>();
  for (const row of rows) {
    const seen = last.get(row.runId);
    if (seen === undefined || row.epoch > seen) last.set(row.runId, row.epoch);
  }
  return rows.filter((row) => row.epoch === last.get(row.runId));
}
