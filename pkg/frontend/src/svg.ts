/**
 * Minimal deterministic SVG emission. No DOM, no randomness: the same
 * inputs always produce the same bytes. Every plotted datum carries its
 * source CSV strings in data-* attributes, so figures are byte-traceable
 * back to their inputs.
 */

export interface Scale {
  (value: number): number;
  domain: [number, number];
  range: [number, number];
  log: boolean;
}

export function makeScale(domain: [number, number], range: [number, number],
                          log = false): Scale {
  const [d0, d1] = log ? [Math.log10(domain[0]), Math.log10(domain[1])] : domain;
  const span = d1 - d0 || 1;
  const fn = ((value: number) => {
    const v = log ? Math.log10(value) : value;
    return range[0] + ((v - d0) / span) * (range[1] - range[0]);
  }) as Scale;
  fn.domain = domain;
  fn.range = range;
  fn.log = log;
  return fn;
}

export function fmt(x: number): string {
  if (!Number.isFinite(x)) return "0";
  return Number(x.toFixed(3)).toString();
}

export function esc(text: string): string {
  return text.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export const PALETTE = [
  "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
  "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
];

/** Simple perceptual ramp for dB heatmaps (dark blue -> yellow). */
const RAMP: Array<[number, [number, number, number]]> = [
  [0.0, [13, 8, 135]],
  [0.25, [84, 2, 163]],
  [0.5, [156, 23, 158]],
  [0.75, [237, 121, 83]],
  [1.0, [240, 249, 33]],
];

export function rampColor(t: number): string {
  const x = Math.min(1, Math.max(0, t));
  for (let i = 1; i < RAMP.length; i++) {
    const [t1, c1] = RAMP[i];
    const [t0, c0] = RAMP[i - 1];
    if (x <= t1) {
      const u = (x - t0) / (t1 - t0);
      const mix = c0.map((c, j) => Math.round(c + u * (c1[j] - c)));
      return `rgb(${mix[0]},${mix[1]},${mix[2]})`;
    }
  }
  const last = RAMP[RAMP.length - 1][1];
  return `rgb(${last[0]},${last[1]},${last[2]})`;
}

export function logTicks(lo: number, hi: number): number[] {
  const ticks: number[] = [];
  for (let e = Math.ceil(Math.log10(lo)); Math.pow(10, e) <= hi * 1.0001; e++) {
    ticks.push(Math.pow(10, e));
  }
  return ticks;
}

export function linTicks(lo: number, hi: number, count = 6): number[] {
  const span = hi - lo;
  if (span <= 0) return [lo];
  const step = Math.pow(10, Math.floor(Math.log10(span / count)));
  const mult = [1, 2, 5, 10].find((m) => span / (step * m) <= count) ?? 10;
  const s = step * mult;
  const first = Math.ceil(lo / s) * s;
  const ticks: number[] = [];
  for (let v = first; v <= hi + 1e-12 * span; v += s) ticks.push(Number(v.toPrecision(12)));
  return ticks;
}

export class SvgBuilder {
  private parts: string[] = [];

  constructor(readonly width: number, readonly height: number) {
    this.parts.push(
      `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" ` +
      `viewBox="0 0 ${width} ${height}" font-family="Helvetica, Arial, sans-serif">`,
      `<rect width="${width}" height="${height}" fill="white"/>`,
    );
  }

  raw(s: string): void {
    this.parts.push(s);
  }

  text(x: number, y: number, content: string, opts: string = ""): void {
    this.parts.push(`<text x="${fmt(x)}" y="${fmt(y)}" font-size="11" ${opts}>${esc(content)}</text>`);
  }

  line(x1: number, y1: number, x2: number, y2: number, stroke = "#000", width = 1): void {
    this.parts.push(
      `<line x1="${fmt(x1)}" y1="${fmt(y1)}" x2="${fmt(x2)}" y2="${fmt(y2)}" ` +
      `stroke="${stroke}" stroke-width="${width}"/>`);
  }

  finish(): string {
    return this.parts.join("\n") + "\n</svg>\n";
  }
}
