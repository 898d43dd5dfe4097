import { readFileSync, writeFileSync } from "node:fs";
import { join } from "node:path";
import { describe, expect, it } from "vitest";

import { run, statsPath } from "../src/cli.js";
import { readMetricsFile } from "../src/metrics.js";
import {
  renderAccuracyCurve,
  renderClientComposition,
  renderRoundsToTarget,
} from "../src/figures.js";
import { roundsToTarget } from "../src/stats.js";
import { rampCrossingAt, tempDir, writeMetricsFixture } from "./fixtures.js";

describe("rounds to target", () => {
  it("reproduces a hand-computed crossing round exactly", () => {
    // accuracy first reaches 0.5 at round 37 by construction
    const dir = tempDir();
    const path = writeMetricsFixture(dir, "fedteddi", 1, rampCrossingAt(37, 60, 0.5));
    const run1 = readMetricsFile(path);
    expect(roundsToTarget(run1.records, 0.5)).toBe(37);
    const { stats } = renderRoundsToTarget([run1], [0.5]);
    const cell = (stats as any).cells[0];
    expect(cell.perSeed).toEqual([37]);
    expect(cell.mean).toBe(37);
    expect(cell.std).toBe(0);
  });

  it("averages crossings across seeds", () => {
    const dir = tempDir();
    const runs = [
      readMetricsFile(writeMetricsFixture(dir, "random", 1, rampCrossingAt(10, 30, 0.5))),
      readMetricsFile(writeMetricsFixture(dir, "random", 2, rampCrossingAt(20, 30, 0.5))),
    ];
    const { stats } = renderRoundsToTarget(runs, [0.5]);
    const cell = (stats as any).cells[0];
    expect(cell.perSeed).toEqual([10, 20]);
    expect(cell.mean).toBe(15);
    expect(cell.std).toBe(5);
  });

  it("renders 'not reached' for unattainable thresholds", () => {
    const dir = tempDir();
    const path = writeMetricsFixture(dir, "fedteddi", 1, rampCrossingAt(5, 20, 0.4));
    const { svg, stats } = renderRoundsToTarget([readMetricsFile(path)], [0.99]);
    expect(svg).toContain("not reached");
    const cell = (stats as any).cells[0];
    expect(cell.perSeed).toEqual([null]);
    expect(cell.mean).toBeNull();
  });

  it("requires at least one threshold", () => {
    const dir = tempDir();
    const path = writeMetricsFixture(dir, "fedteddi", 1, rampCrossingAt(5, 10, 0.4));
    expect(() => renderRoundsToTarget([readMetricsFile(path)], [])).toThrow("--targets");
  });
});

describe("accuracy curve", () => {
  it("averages seeds per round and shades one std", () => {
    const dir = tempDir();
    const runs = [
      readMetricsFile(writeMetricsFixture(dir, "fedteddi", 1, [{ accuracy: 0.2 }, { accuracy: 0.6 }])),
      readMetricsFile(writeMetricsFixture(dir, "fedteddi", 2, [{ accuracy: 0.4 }, { accuracy: 0.8 }])),
    ];
    const { svg, stats } = renderAccuracyCurve(runs);
    const curve = (stats as any).policies[0];
    expect(curve.mean[0]).toBeCloseTo(0.3, 12);
    expect(curve.mean[1]).toBeCloseTo(0.7, 12);
    expect(curve.std[0]).toBeCloseTo(0.1, 12);
    expect(svg).toContain("polygon"); // std band present with > 1 seed
    expect(svg).toContain("polyline");
  });
});

describe("client composition", () => {
  it("splits average counts into new-data and old-data clients", () => {
    const dir = tempDir();
    const rows = [
      { accuracy: 0.4, frame: 1, selected: [0, 1, 2, 3], newData: 3 },
      { accuracy: 0.5, frame: 1, selected: [0, 1], newData: 1 },
    ];
    const path = writeMetricsFixture(dir, "pure_drift", 1, rows);
    const { stats } = renderClientComposition([readMetricsFile(path)]);
    const row = (stats as any).policies[0];
    expect(row.newData).toBe(2);
    expect(row.oldData).toBe(1);
  });

  it("falls back to all rounds for single-frame runs", () => {
    const dir = tempDir();
    const rows = [{ accuracy: 0.4, frame: 0, selected: [0, 1], newData: 0 }];
    const path = writeMetricsFixture(dir, "random", 1, rows);
    const { stats } = renderClientComposition([readMetricsFile(path)]);
    expect((stats as any).policies[0].newData + (stats as any).policies[0].oldData).toBe(2);
  });
});

describe("cli", () => {
  it("writes the figure and a diffable sidecar, byte-identical across reruns", () => {
    const dir = tempDir();
    const a = writeMetricsFixture(dir, "fedteddi", 1, rampCrossingAt(8, 20, 0.5));
    const b = writeMetricsFixture(dir, "random", 1, rampCrossingAt(14, 20, 0.5));
    const out = join(dir, "fig.svg");
    expect(run(["--kind", "rounds_to_target", "--in", a, b, "--out", out, "--targets", "0.5,0.9"])).toBe(0);
    const svg1 = readFileSync(out, "utf8");
    const stats1 = readFileSync(statsPath(out), "utf8");
    expect(run(["--kind", "rounds_to_target", "--in", a, b, "--out", out, "--targets", "0.5,0.9"])).toBe(0);
    expect(readFileSync(out, "utf8")).toBe(svg1);
    expect(readFileSync(statsPath(out), "utf8")).toBe(stats1);
    expect(svg1.startsWith("<svg")).toBe(true);
    expect(svg1).toContain("not reached"); // 0.9 never reached in the fixture
  });

  it("rejects bad usage with exit code 2", () => {
    expect(run(["--kind", "pie"])).toBe(2);
    expect(run(["--in", "x.jsonl"])).toBe(2);
  });

  it("returns 1 when an input file is malformed", () => {
    const dir = tempDir();
    const bad = join(dir, "random_seed1.jsonl");
    writeFileSync(bad, "schema=7\n");
    expect(run(["--kind", "accuracy_curve", "--in", bad, "--out", join(dir, "o.svg")])).toBe(1);
  });
});
