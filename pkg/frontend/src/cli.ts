#!/usr/bin/env node
/**
 * plots --kind <accuracy_curve|client_composition|rounds_to_target>
 *       --in <metrics.jsonl ...> --out <figure.svg> [--targets 0.5,0.75]
 *
 * Writes the figure as SVG plus a `<out>.stats.json` sidecar holding the
 * numbers behind it, so reruns can be diffed.
 */

import { realpathSync, writeFileSync } from "node:fs";
import { pathToFileURL } from "node:url";

import { FigureKind, FigureSpec, renderFigure } from "./figures.js";
import { readMetricsFile } from "./metrics.js";

const KINDS: FigureKind[] = ["accuracy_curve", "client_composition", "rounds_to_target"];

export function parseArgs(argv: string[]): FigureSpec {
  let kind: string | undefined;
  const inputs: string[] = [];
  let outputPath: string | undefined;
  let thresholds: number[] | undefined;

  for (let i = 0; i < argv.length; i++) {
    const arg = argv[i];
    switch (arg) {
      case "--kind":
        kind = argv[++i];
        break;
      case "--in":
        while (i + 1 < argv.length && !argv[i + 1].startsWith("--")) {
          inputs.push(argv[++i]);
        }
        break;
      case "--out":
        outputPath = argv[++i];
        break;
      case "--targets":
        thresholds = (argv[++i] ?? "")
          .split(",")
          .filter((s) => s !== "")
          .map(Number);
        if (thresholds.some((t) => !Number.isFinite(t))) {
          throw new Error("--targets must be a comma-separated list of numbers");
        }
        break;
      default:
        throw new Error(`unknown argument ${arg}`);
    }
  }
  if (!kind || !KINDS.includes(kind as FigureKind)) {
    throw new Error(`--kind must be one of ${KINDS.join(", ")}`);
  }
  if (inputs.length === 0) throw new Error("--in needs at least one metrics file");
  if (!outputPath) throw new Error("--out is required");
  return { kind: kind as FigureKind, inputs, outputPath, thresholds };
}

export function statsPath(outputPath: string): string {
  return `${outputPath}.stats.json`;
}

export function run(argv: string[]): number {
  let spec: FigureSpec;
  try {
    spec = parseArgs(argv);
  } catch (e) {
    console.error(`usage error: ${(e as Error).message}`);
    return 2;
  }
  try {
    const runs = spec.inputs.map(readMetricsFile);
    const { svg, stats } = renderFigure(spec, runs);
    writeFileSync(spec.outputPath, svg);
    writeFileSync(statsPath(spec.outputPath), JSON.stringify(stats, null, 2) + "\n");
    console.log(`wrote ${spec.outputPath} and ${statsPath(spec.outputPath)}`);
    return 0;
  } catch (e) {
    console.error(`error: ${(e as Error).message}`);
    return 1;
  }
}

const invokedDirectly = (() => {
  if (!process.argv[1]) return false;
  try {
    return import.meta.url === pathToFileURL(realpathSync(process.argv[1])).href;
  } catch {
    return false;
  }
})();
if (invokedDirectly) {
  process.exit(run(process.argv.slice(2)));
}
