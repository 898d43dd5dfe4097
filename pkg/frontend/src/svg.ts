/** Tiny deterministic SVG builder: fixed precision, no ids, no timestamps,
 * so identical inputs produce byte-identical files. */

export const WIDTH = 760;
export const HEIGHT = 420;
export const MARGIN = { top: 36, right: 24, bottom: 46, left: 56 };

/** Fixed style map keyed by policy id: stable colors and legend order. */
export const POLICY_COLORS: Record<string, string> = {
  fedteddi: "#d62728",
  fedcgd: "#1f77b4",
  fedcbs: "#9467bd",
  pure_drift: "#2ca02c",
  power_of_choice: "#8c564b",
  best_norm: "#e377c2",
  best_channel: "#ff7f0e",
  random: "#7f7f7f",
};

export function colorFor(policy: string): string {
  return POLICY_COLORS[policy] ?? "#17becf";
}

export function fmt(v: number): string {
  if (!Number.isFinite(v)) return "0";
  return v.toFixed(2).replace(/\.00$/, "");
}

export interface Scale {
  (v: number): number;
}

export function linearScale(d0: number, d1: number, r0: number, r1: number): Scale {
  const span = d1 - d0 || 1;
  return (v: number) => r0 + ((v - d0) / span) * (r1 - r0);
}

export class Svg {
  private parts: string[] = [];

  constructor(private width = WIDTH, private height = HEIGHT) {}

  rect(x: number, y: number, w: number, h: number, fill: string, opacity = 1): void {
    this.parts.push(
      `<rect x="${fmt(x)}" y="${fmt(y)}" width="${fmt(w)}" height="${fmt(h)}" fill="${fill}"` +
        (opacity !== 1 ? ` fill-opacity="${fmt(opacity)}"` : "") + "/>",
    );
  }

  line(x1: number, y1: number, x2: number, y2: number, stroke = "#333", width = 1): void {
    this.parts.push(
      `<line x1="${fmt(x1)}" y1="${fmt(y1)}" x2="${fmt(x2)}" y2="${fmt(y2)}" ` +
        `stroke="${stroke}" stroke-width="${fmt(width)}"/>`,
    );
  }

  polyline(points: [number, number][], stroke: string, width = 2): void {
    const path = points.map(([x, y]) => `${fmt(x)},${fmt(y)}`).join(" ");
    this.parts.push(
      `<polyline points="${path}" fill="none" stroke="${stroke}" stroke-width="${fmt(width)}"/>`,
    );
  }

  band(upper: [number, number][], lower: [number, number][], fill: string, opacity = 0.18): void {
    const pts = [...upper, ...[...lower].reverse()]
      .map(([x, y]) => `${fmt(x)},${fmt(y)}`)
      .join(" ");
    this.parts.push(`<polygon points="${pts}" fill="${fill}" fill-opacity="${fmt(opacity)}"/>`);
  }

  text(x: number, y: number, content: string, opts: { size?: number; anchor?: string; fill?: string; rotate?: number } = {}): void {
    const size = opts.size ?? 12;
    const anchor = opts.anchor ?? "start";
    const fill = opts.fill ?? "#222";
    const transform = opts.rotate ? ` transform="rotate(${fmt(opts.rotate)} ${fmt(x)} ${fmt(y)})"` : "";
    this.parts.push(
      `<text x="${fmt(x)}" y="${fmt(y)}" font-family="Helvetica,Arial,sans-serif" ` +
        `font-size="${size}" text-anchor="${anchor}" fill="${fill}"${transform}>${escapeXml(content)}</text>`,
    );
  }

  render(): string {
    return (
      `<svg xmlns="http://www.w3.org/2000/svg" width="${this.width}" height="${this.height}" ` +
      `viewBox="0 0 ${this.width} ${this.height}">\n<rect width="${this.width}" height="${this.height}" fill="#ffffff"/>\n` +
      this.parts.join("\n") +
      "\n</svg>\n"
    );
  }
}

export function escapeXml(s: string): string {
  return s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

/** Axis ticks at round values: 5 evenly spaced, rounded to integers where possible. */
export function ticks(lo: number, hi: number, count = 5): number[] {
  const out: number[] = [];
  for (let i = 0; i <= count; i++) out.push(lo + ((hi - lo) * i) / count);
  return out;
}
