/** The three figure kinds rendered from metrics files. Each renderer
 * returns the SVG text plus the sidecar stats object that backs it. */

import { MetricsRun, groupByPolicy } from "./metrics.js";
import {
  CurveStats,
  CompositionStats,
  TargetStats,
  accuracyCurve,
  clientComposition,
  targetStats,
} from "./stats.js";
import { HEIGHT, MARGIN, Svg, WIDTH, colorFor, fmt, linearScale, ticks } from "./svg.js";

export type FigureKind = "accuracy_curve" | "client_composition" | "rounds_to_target";

export interface FigureSpec {
  kind: FigureKind;
  inputs: string[];
  outputPath: string;
  thresholds?: number[];
}

export interface RenderResult {
  svg: string;
  stats: object;
}

const PLOT_LEFT = MARGIN.left;
const PLOT_RIGHT = WIDTH - MARGIN.right;
const PLOT_TOP = MARGIN.top;
const PLOT_BOTTOM = HEIGHT - MARGIN.bottom;

function drawFrame(svg: Svg, title: string, xLabel: string, yLabel: string): void {
  svg.text(WIDTH / 2, 20, title, { size: 14, anchor: "middle" });
  svg.line(PLOT_LEFT, PLOT_BOTTOM, PLOT_RIGHT, PLOT_BOTTOM);
  svg.line(PLOT_LEFT, PLOT_TOP, PLOT_LEFT, PLOT_BOTTOM);
  svg.text((PLOT_LEFT + PLOT_RIGHT) / 2, HEIGHT - 12, xLabel, { anchor: "middle" });
  svg.text(16, (PLOT_TOP + PLOT_BOTTOM) / 2, yLabel, { anchor: "middle", rotate: -90 });
}

function drawLegend(svg: Svg, policies: string[]): void {
  let x = PLOT_LEFT + 8;
  const y = PLOT_TOP - 8;
  for (const policy of policies) {
    svg.rect(x, y - 9, 10, 10, colorFor(policy));
    svg.text(x + 14, y, policy, { size: 11 });
    x += 14 + 7 * policy.length + 18;
  }
}

export function renderAccuracyCurve(runs: MetricsRun[]): RenderResult {
  const byPolicy = groupByPolicy(runs);
  const curves: CurveStats[] = [];
  for (const [policy, group] of byPolicy) curves.push(accuracyCurve(policy, group));

  const maxRounds = Math.max(...curves.map((c) => c.rounds));
  const x = linearScale(1, maxRounds, PLOT_LEFT, PLOT_RIGHT);
  const y = linearScale(0, 1, PLOT_BOTTOM, PLOT_TOP);

  const svg = new Svg();
  drawFrame(svg, "Test accuracy vs round", "round", "test accuracy");
  for (const t of ticks(0, 1)) {
    svg.line(PLOT_LEFT - 4, y(t), PLOT_LEFT, y(t));
    svg.text(PLOT_LEFT - 8, y(t) + 4, fmt(t), { anchor: "end", size: 10 });
  }
  for (const t of ticks(1, maxRounds)) {
    svg.line(x(t), PLOT_BOTTOM, x(t), PLOT_BOTTOM + 4);
    svg.text(x(t), PLOT_BOTTOM + 16, String(Math.round(t)), { anchor: "middle", size: 10 });
  }
  for (const curve of curves) {
    const color = colorFor(curve.policy);
    const upper: [number, number][] = [];
    const lower: [number, number][] = [];
    const line: [number, number][] = [];
    for (let k = 0; k < curve.rounds; k++) {
      line.push([x(k + 1), y(curve.mean[k])]);
      upper.push([x(k + 1), y(Math.min(1, curve.mean[k] + curve.std[k]))]);
      lower.push([x(k + 1), y(Math.max(0, curve.mean[k] - curve.std[k]))]);
    }
    if (curve.seeds.length > 1) svg.band(upper, lower, color);
    svg.polyline(line, color);
  }
  drawLegend(svg, curves.map((c) => c.policy));
  return {
    svg: svg.render(),
    stats: { kind: "accuracy_curve", policies: curves },
  };
}

export function renderClientComposition(runs: MetricsRun[]): RenderResult {
  const byPolicy = groupByPolicy(runs);
  const rows: CompositionStats[] = [];
  for (const [policy, group] of byPolicy) rows.push(clientComposition(policy, group));

  const maxTotal = Math.max(...rows.map((r) => r.newData + r.oldData), 1);
  const y = linearScale(0, maxTotal, PLOT_BOTTOM, PLOT_TOP);
  const slot = (PLOT_RIGHT - PLOT_LEFT) / rows.length;
  const barWidth = Math.min(64, slot * 0.6);

  const svg = new Svg();
  drawFrame(svg, "Average scheduled clients per round", "policy", "clients");
  for (const t of ticks(0, maxTotal)) {
    svg.line(PLOT_LEFT - 4, y(t), PLOT_LEFT, y(t));
    svg.text(PLOT_LEFT - 8, y(t) + 4, fmt(t), { anchor: "end", size: 10 });
  }
  rows.forEach((row, i) => {
    const cx = PLOT_LEFT + slot * (i + 0.5);
    const x0 = cx - barWidth / 2;
    const yNew = y(row.newData);
    const yTotal = y(row.newData + row.oldData);
    // stacked: new-data clients at the bottom, the rest on top
    svg.rect(x0, yNew, barWidth, PLOT_BOTTOM - yNew, colorFor(row.policy));
    svg.rect(x0, yTotal, barWidth, yNew - yTotal, colorFor(row.policy), 0.45);
    svg.text(cx, PLOT_BOTTOM + 16, row.policy, { anchor: "middle", size: 10 });
    svg.text(cx, yTotal - 6, fmt(row.newData + row.oldData), { anchor: "middle", size: 10 });
  });
  svg.text(PLOT_RIGHT, PLOT_TOP - 8, "solid = clients with new data", {
    anchor: "end", size: 11, fill: "#555",
  });
  return {
    svg: svg.render(),
    stats: { kind: "client_composition", policies: rows },
  };
}

export function renderRoundsToTarget(runs: MetricsRun[], thresholds: number[]): RenderResult {
  if (thresholds.length === 0) {
    throw new Error("rounds_to_target needs at least one --targets threshold");
  }
  const byPolicy = groupByPolicy(runs);
  const cells: TargetStats[] = [];
  for (const [policy, group] of byPolicy) {
    for (const t of thresholds) cells.push(targetStats(policy, group, t));
  }

  const reachedMeans = cells.filter((c) => c.mean !== null).map((c) => c.mean as number);
  const maxRounds = Math.max(...reachedMeans, 1);
  const y = linearScale(0, maxRounds * 1.15, PLOT_BOTTOM, PLOT_TOP);
  const slot = (PLOT_RIGHT - PLOT_LEFT) / cells.length;
  const barWidth = Math.min(56, slot * 0.6);

  const svg = new Svg();
  drawFrame(svg, "Rounds to reach accuracy targets", "policy / target", "rounds");
  for (const t of ticks(0, maxRounds * 1.15)) {
    svg.line(PLOT_LEFT - 4, y(t), PLOT_LEFT, y(t));
    svg.text(PLOT_LEFT - 8, y(t) + 4, fmt(t), { anchor: "end", size: 10 });
  }
  cells.forEach((cell, i) => {
    const cx = PLOT_LEFT + slot * (i + 0.5);
    svg.text(cx, PLOT_BOTTOM + 16, cell.policy, { anchor: "middle", size: 10 });
    svg.text(cx, PLOT_BOTTOM + 30, `acc>=${cell.threshold}`, { anchor: "middle", size: 10, fill: "#555" });
    if (cell.mean === null) {
      svg.text(cx, (PLOT_TOP + PLOT_BOTTOM) / 2, "not reached", {
        anchor: "middle", size: 11, fill: "#b00", rotate: -90,
      });
      return;
    }
    const x0 = cx - barWidth / 2;
    const top = y(cell.mean);
    svg.rect(x0, top, barWidth, PLOT_BOTTOM - top, colorFor(cell.policy));
    if (cell.std !== null && cell.std > 0) {
      svg.line(cx, y(cell.mean + cell.std), cx, y(Math.max(0, cell.mean - cell.std)), "#222", 1.5);
    }
    svg.text(cx, top - 6, fmt(cell.mean), { anchor: "middle", size: 10 });
  });
  return {
    svg: svg.render(),
    stats: { kind: "rounds_to_target", thresholds, cells },
  };
}

export function renderFigure(spec: FigureSpec, runs: MetricsRun[]): RenderResult {
  switch (spec.kind) {
    case "accuracy_curve":
      return renderAccuracyCurve(runs);
    case "client_composition":
      return renderClientComposition(runs);
    case "rounds_to_target":
      return renderRoundsToTarget(runs, spec.thresholds ?? []);
  }
}
