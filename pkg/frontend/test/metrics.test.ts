import { writeFileSync } from "node:fs";
import { join } from "node:path";
import { describe, expect, it } from "vitest";

import { groupByPolicy, parseRunName, readMetricsFile } from "../src/metrics.js";
import { tempDir, writeMetricsFixture } from "./fixtures.js";

describe("metrics reader", () => {
  it("parses policy and seed from the filename", () => {
    expect(parseRunName("/tmp/x/pure_drift_seed12.jsonl")).toEqual({
      policy: "pure_drift",
      seed: 12,
    });
  });

  it("rejects filenames outside the convention", () => {
    expect(() => parseRunName("metrics.csv")).toThrow("not <policy>_seed<seed>.jsonl");
  });

  it("reads header and records", () => {
    const dir = tempDir();
    const path = writeMetricsFixture(dir, "random", 3, [{ accuracy: 0.5 }, { accuracy: 0.7 }]);
    const run = readMetricsFile(path);
    expect(run.policy).toBe("random");
    expect(run.seed).toBe(3);
    expect(run.records).toHaveLength(2);
    expect(run.records[1].test_accuracy).toBe(0.7);
  });

  it("names the file on a schema mismatch", () => {
    const dir = tempDir();
    const path = join(dir, "random_seed1.jsonl");
    writeFileSync(path, "schema=2\n{}\n");
    expect(() => readMetricsFile(path)).toThrow(path);
    expect(() => readMetricsFile(path)).toThrow("schema=1");
  });

  it("groups runs by policy in deterministic order", () => {
    const dir = tempDir();
    const runs = [
      readMetricsFile(writeMetricsFixture(dir, "random", 2, [{ accuracy: 0.4 }])),
      readMetricsFile(writeMetricsFixture(dir, "fedteddi", 1, [{ accuracy: 0.6 }])),
      readMetricsFile(writeMetricsFixture(dir, "random", 1, [{ accuracy: 0.5 }])),
    ];
    const grouped = groupByPolicy(runs);
    expect([...grouped.keys()]).toEqual(["fedteddi", "random"]);
    expect(grouped.get("random")!.map((r) => r.seed)).toEqual([1, 2]);
  });
});
