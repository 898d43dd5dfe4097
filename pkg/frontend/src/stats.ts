/** Summary statistics behind the figures; figures never recompute
 * simulation quantities, they only aggregate what the metrics files hold. */

import { MetricsRun, RoundRecord } from "./metrics.js";

export function mean(values: number[]): number {
  return values.reduce((a, b) => a + b, 0) / values.length;
}

export function std(values: number[]): number {
  if (values.length === 0) return 0;
  const m = mean(values);
  return Math.sqrt(mean(values.map((v) => (v - m) * (v - m))));
}

/** 1-based index of the first round whose accuracy reaches the threshold. */
export function roundsToTarget(records: RoundRecord[], threshold: number): number | null {
  for (let i = 0; i < records.length; i++) {
    if (records[i].test_accuracy >= threshold) return i + 1;
  }
  return null;
}

export interface CurveStats {
  policy: string;
  seeds: number[];
  rounds: number;
  mean: number[];
  std: number[];
}

/** Per-round mean/std of test accuracy across a policy's seeds. */
export function accuracyCurve(policy: string, runs: MetricsRun[]): CurveStats {
  const rounds = Math.min(...runs.map((r) => r.records.length));
  const meanCurve: number[] = [];
  const stdCurve: number[] = [];
  for (let k = 0; k < rounds; k++) {
    const values = runs.map((r) => r.records[k].test_accuracy);
    meanCurve.push(mean(values));
    stdCurve.push(std(values));
  }
  return {
    policy,
    seeds: runs.map((r) => r.seed),
    rounds,
    mean: meanCurve,
    std: stdCurve,
  };
}

export interface CompositionStats {
  policy: string;
  seeds: number[];
  /** average clients per round holding newly arrived data */
  newData: number;
  /** average clients per round without new data */
  oldData: number;
}

/** Average scheduled-set composition over post-arrival frames (falls back
 * to every round when the run has a single frame). */
export function clientComposition(policy: string, runs: MetricsRun[]): CompositionStats {
  const totals: number[] = [];
  const fresh: number[] = [];
  for (const run of runs) {
    let rows = run.records.filter((r) => r.frame >= 1);
    if (rows.length === 0) rows = run.records;
    for (const r of rows) {
      totals.push(r.selected.length);
      fresh.push(r.new_data_selected);
    }
  }
  const newData = fresh.length ? mean(fresh) : 0;
  const total = totals.length ? mean(totals) : 0;
  return {
    policy,
    seeds: runs.map((r) => r.seed),
    newData,
    oldData: total - newData,
  };
}

export interface TargetStats {
  policy: string;
  threshold: number;
  perSeed: (number | null)[];
  reached: number;
  mean: number | null;
  std: number | null;
}

export function targetStats(policy: string, runs: MetricsRun[], threshold: number): TargetStats {
  const perSeed = runs.map((r) => roundsToTarget(r.records, threshold));
  const reached = perSeed.filter((v): v is number => v !== null);
  return {
    policy,
    threshold,
    perSeed,
    reached: reached.length,
    mean: reached.length ? mean(reached) : null,
    std: reached.length ? std(reached) : null,
  };
}
