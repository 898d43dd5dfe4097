/**
 * Reader for the simulator's metrics files: a literal `schema=1` header
 * line followed by one JSON round record per line. The (policy, seed)
 * pair lives in the filename, `<policy>_seed<seed>.jsonl`.
 */

import { readFileSync } from "node:fs";
import { basename } from "node:path";

export const SCHEMA_HEADER = "schema=1";

export interface RoundRecord {
  frame: number;
  round: number;
  selected: number[];
  new_data_selected: number;
  bandwidths: Record<string, number>;
  round_delay_s: number;
  global_loss: number;
  test_accuracy: number;
  lambda: number;
  sigma_hat: number;
  objective_sampling: number | null;
  objective_divergence: number | null;
  objective_drift: number | null;
  v_iteration: number | null;
  v_sampling: number | null;
  v_divergence: number | null;
}

export interface MetricsRun {
  policy: string;
  seed: number;
  path: string;
  records: RoundRecord[];
}

const FILENAME = /^([a-z_]+)_seed(-?\d+)\.jsonl$/;

export function parseRunName(path: string): { policy: string; seed: number } {
  const m = FILENAME.exec(basename(path));
  if (!m) {
    throw new Error(`${path}: filename is not <policy>_seed<seed>.jsonl`);
  }
  return { policy: m[1], seed: Number(m[2]) };
}

export function readMetricsFile(path: string): MetricsRun {
  const { policy, seed } = parseRunName(path);
  const text = readFileSync(path, "utf8");
  const lines = text.split("\n");
  if (lines[0] !== SCHEMA_HEADER) {
    throw new Error(`${path}: expected header "${SCHEMA_HEADER}", got "${lines[0] ?? ""}"`);
  }
  const records: RoundRecord[] = [];
  for (let i = 1; i < lines.length; i++) {
    const line = lines[i].trim();
    if (line === "") continue;
    try {
      records.push(JSON.parse(line) as RoundRecord);
    } catch {
      throw new Error(`${path}: line ${i + 1} is not valid JSON`);
    }
  }
  return { policy, seed, path, records };
}

/** Group runs by policy, sorted by (policy, seed) for deterministic output. */
export function groupByPolicy(runs: MetricsRun[]): Map<string, MetricsRun[]> {
  const byPolicy = new Map<string, MetricsRun[]>();
  const sorted = [...runs].sort((a, b) =>
    a.policy === b.policy ? a.seed - b.seed : a.policy < b.policy ? -1 : 1,
  );
  for (const run of sorted) {
    const bucket = byPolicy.get(run.policy) ?? [];
    bucket.push(run);
    byPolicy.set(run.policy, bucket);
  }
  return byPolicy;
}
