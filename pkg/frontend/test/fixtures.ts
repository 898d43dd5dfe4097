/** Shared fixture builders: synthetic metrics files in the schema=1 format. */

import { mkdtempSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

import { SCHEMA_HEADER } from "../src/metrics.js";

export interface RecordSeed {
  frame?: number;
  round?: number;
  selected?: number[];
  newData?: number;
  accuracy: number;
}

export function makeRecord(seed: RecordSeed, index: number): object {
  return {
    frame: seed.frame ?? 0,
    round: seed.round ?? index + 1,
    selected: seed.selected ?? [0, 1],
    new_data_selected: seed.newData ?? 0,
    bandwidths: { "0": 1e6, "1": 1.5e6 },
    round_delay_s: 0.9,
    global_loss: 1.0 / (index + 1),
    test_accuracy: seed.accuracy,
    lambda: 0.5,
    sigma_hat: 2.0,
    objective_sampling: 0.2,
    objective_divergence: 0.1,
    objective_drift: 0.05,
    v_iteration: 0.01,
    v_sampling: 0.02,
    v_divergence: 0.03,
  };
}

export function writeMetricsFixture(
  dir: string,
  policy: string,
  seed: number,
  rows: RecordSeed[],
): string {
  const path = join(dir, `${policy}_seed${seed}.jsonl`);
  const lines = [SCHEMA_HEADER, ...rows.map((r, i) => JSON.stringify(makeRecord(r, i)))];
  writeFileSync(path, lines.join("\n") + "\n");
  return path;
}

export function tempDir(): string {
  return mkdtempSync(join(tmpdir(), "plots-test-"));
}

/** Accuracy ramp that first crosses `level` exactly at round `crossing`. */
export function rampCrossingAt(crossing: number, total: number, level: number): RecordSeed[] {
  const rows: RecordSeed[] = [];
  for (let k = 1; k <= total; k++) {
    const accuracy = k < crossing ? level * (k / crossing) * 0.9 : Math.min(0.999, level + 0.01 * (k - crossing + 1));
    rows.push({ accuracy });
  }
  return rows;
}
