/**
 * Figure assembly. Rendering never alters or re-derives numbers: curve
 * points are drawn at scaled positions of the parsed CSV values and each
 * marker embeds the original strings in data-x / data-y attributes.
 */

import {
  CurveRow,
  SurfaceRow,
  assertConsistentHashes,
  groupByMetric,
  hashesOf,
  readCurveCsv,
  readSurfaceCsv,
} from "./csv.js";
import { FigureSpec } from "./spec.js";
import {
  PALETTE,
  Scale,
  SvgBuilder,
  esc,
  fmt,
  linTicks,
  logTicks,
  makeScale,
  rampColor,
} from "./svg.js";

const MARGIN = { left: 64, right: 16, top: 28, bottom: 44 };

interface Frame {
  svg: SvgBuilder;
  x: Scale;
  y: Scale;
  plotLeft: number;
  plotRight: number;
  plotTop: number;
  plotBottom: number;
}

function makeFrame(spec: FigureSpec, xDomain: [number, number],
                   yDomain: [number, number], logY: boolean): Frame {
  const width = spec.width ?? 640;
  const height = spec.height ?? 420;
  const svg = new SvgBuilder(width, height);
  const plotLeft = MARGIN.left;
  const plotRight = width - MARGIN.right;
  const plotTop = MARGIN.top;
  const plotBottom = height - MARGIN.bottom;
  const x = makeScale(xDomain, [plotLeft, plotRight]);
  const y = makeScale(yDomain, [plotBottom, plotTop], logY);
  svg.raw(`<rect x="${plotLeft}" y="${plotTop}" width="${plotRight - plotLeft}" ` +
    `height="${plotBottom - plotTop}" fill="none" stroke="#333"/>`);
  if (spec.title) svg.text((plotLeft + plotRight) / 2, 16, spec.title, 'text-anchor="middle" font-size="13"');
  if (spec.xLabel) {
    svg.text((plotLeft + plotRight) / 2, height - 8, spec.xLabel, 'text-anchor="middle"');
  }
  if (spec.yLabel) {
    svg.raw(`<text x="14" y="${(plotTop + plotBottom) / 2}" font-size="11" text-anchor="middle" ` +
      `transform="rotate(-90 14 ${(plotTop + plotBottom) / 2})">${esc(spec.yLabel)}</text>`);
  }
  const xt = linTicks(xDomain[0], xDomain[1]);
  for (const t of xt) {
    const px = x(t);
    svg.line(px, plotBottom, px, plotBottom + 4, "#333");
    svg.line(px, plotTop, px, plotBottom, "#eee");
    svg.text(px, plotBottom + 16, String(t), 'text-anchor="middle"');
  }
  const yt = logY ? logTicks(yDomain[0], yDomain[1]) : linTicks(yDomain[0], yDomain[1]);
  for (const t of yt) {
    const py = y(t);
    svg.line(plotLeft - 4, py, plotLeft, py, "#333");
    svg.line(plotLeft, py, plotRight, py, "#eee");
    const label = logY ? `1e${Math.round(Math.log10(t))}` : String(t);
    svg.text(plotLeft - 6, py + 4, label, 'text-anchor="end"');
  }
  return { svg, x, y, plotLeft, plotRight, plotTop, plotBottom };
}

function drawCurve(frame: Frame, rows: CurveRow[], color: string, name: string,
                   logY: boolean): void {
  const pts = rows
    .filter((r) => !logY || r.mean > 0)
    .map((r) => ({ r, px: frame.x(r.x), py: frame.y(r.mean) }));
  if (pts.length === 0) return;
  const path = pts.map((p, i) => `${i === 0 ? "M" : "L"}${fmt(p.px)},${fmt(p.py)}`).join(" ");
  frame.svg.raw(`<path d="${path}" fill="none" stroke="${color}" stroke-width="1.5" ` +
    `data-metric="${esc(name)}"/>`);
  for (const p of pts) {
    frame.svg.raw(`<circle cx="${fmt(p.px)}" cy="${fmt(p.py)}" r="2.2" fill="${color}" ` +
      `data-metric="${esc(name)}" data-x="${esc(p.r.raw.x)}" data-y="${esc(p.r.raw.mean)}"/>`);
  }
}

function drawLegend(frame: Frame, entries: Array<[string, string]>): void {
  let yPos = frame.plotTop + 14;
  for (const [name, color] of entries) {
    frame.svg.line(frame.plotLeft + 8, yPos - 4, frame.plotLeft + 28, yPos - 4, color, 2);
    frame.svg.text(frame.plotLeft + 32, yPos, name);
    yPos += 14;
  }
}

function selectMetrics(groups: Map<string, CurveRow[]>, spec: FigureSpec): string[] {
  const names = [...groups.keys()].sort();
  if (!spec.metrics) return names;
  const missing = spec.metrics.filter((m) => !groups.has(m));
  if (missing.length > 0) {
    throw new Error(`metrics not present in inputs: ${missing.join(", ")}`);
  }
  return spec.metrics;
}

function renderCurveFigure(spec: FigureSpec, logY: boolean,
                           yFloor?: number): string {
  const rowSets = spec.inputs.map(readCurveCsv);
  assertConsistentHashes(rowSets.map(hashesOf), spec.inputs.join(" + "));
  const groups = groupByMetric(rowSets.flat());
  const names = selectMetrics(groups, spec);
  const rows = names.flatMap((n) => groups.get(n)!);
  const xs = rows.map((r) => r.x);
  let ys = rows.map((r) => r.mean);
  if (logY) ys = ys.filter((v) => v > 0);
  if (ys.length === 0) throw new Error("no positive values to draw on a log axis");
  let yLo = Math.min(...ys);
  let yHi = Math.max(...ys);
  if (yFloor !== undefined) yLo = Math.max(yLo, yFloor);
  if (logY) {
    yLo = Math.pow(10, Math.floor(Math.log10(yLo)));
    yHi = Math.pow(10, Math.ceil(Math.log10(yHi)));
    if (yLo === yHi) yHi = yLo * 10;
  }
  const frame = makeFrame(spec, [Math.min(...xs), Math.max(...xs)], [yLo, yHi], logY);
  const legend: Array<[string, string]> = [];
  names.forEach((name, i) => {
    const color = PALETTE[i % PALETTE.length];
    const sorted = [...groups.get(name)!].sort((a, b) => a.x - b.x);
    drawCurve(frame, sorted, color, name, logY);
    legend.push([name, color]);
  });
  drawLegend(frame, legend);
  return frame.svg.finish();
}

function renderAmbiguity(spec: FigureSpec): string {
  if (spec.inputs.length !== 1) {
    throw new Error("ambiguity heatmaps take exactly one surface CSV");
  }
  const rows = readSurfaceCsv(spec.inputs[0]);
  assertConsistentHashes([hashesOf(rows)], spec.inputs[0]);
  const floor = spec.floorDb ?? -60;
  const taus = [...new Set(rows.map((r) => r.tau))].sort((a, b) => a - b);
  const nus = [...new Set(rows.map((r) => r.nu))].sort((a, b) => a - b);
  const width = spec.width ?? 640;
  const height = spec.height ?? 480;
  const svg = new SvgBuilder(width, height);
  const plotLeft = MARGIN.left;
  const plotRight = width - 90;
  const plotTop = MARGIN.top;
  const plotBottom = height - MARGIN.bottom;
  const cellW = (plotRight - plotLeft) / taus.length;
  const cellH = (plotBottom - plotTop) / nus.length;
  const tauIndex = new Map(taus.map((t, i) => [t, i]));
  const nuIndex = new Map(nus.map((v, i) => [v, i]));
  if (spec.title) svg.text((plotLeft + plotRight) / 2, 16, spec.title, 'text-anchor="middle" font-size="13"');
  for (const r of rows) {
    const i = tauIndex.get(r.tau)!;
    const j = nuIndex.get(r.nu)!;
    const clipped = Math.max(r.magDb, floor);
    const t = (clipped - floor) / (0 - floor);
    const x0 = plotLeft + i * cellW;
    const y0 = plotBottom - (j + 1) * cellH;
    svg.raw(`<rect x="${fmt(x0)}" y="${fmt(y0)}" width="${fmt(cellW + 0.5)}" ` +
      `height="${fmt(cellH + 0.5)}" fill="${rampColor(t)}" data-x="${esc(r.raw.tau)}" ` +
      `data-nu="${esc(r.raw.nu)}" data-y="${esc(r.raw.magDb)}"/>`);
  }
  svg.raw(`<rect x="${plotLeft}" y="${plotTop}" width="${plotRight - plotLeft}" ` +
    `height="${plotBottom - plotTop}" fill="none" stroke="#333"/>`);
  svg.text((plotLeft + plotRight) / 2, height - 8, spec.xLabel ?? "delay (bins)",
    'text-anchor="middle"');
  svg.raw(`<text x="14" y="${(plotTop + plotBottom) / 2}" font-size="11" text-anchor="middle" ` +
    `transform="rotate(-90 14 ${(plotTop + plotBottom) / 2})">${esc(spec.yLabel ?? "Doppler (bins)")}</text>`);
  // colorbar
  const barX = plotRight + 18;
  const steps = 64;
  for (let s = 0; s < steps; s++) {
    const y0 = plotBottom - ((s + 1) / steps) * (plotBottom - plotTop);
    svg.raw(`<rect x="${barX}" y="${fmt(y0)}" width="14" ` +
      `height="${fmt((plotBottom - plotTop) / steps + 0.5)}" fill="${rampColor((s + 0.5) / steps)}"/>`);
  }
  svg.raw(`<rect x="${barX}" y="${plotTop}" width="14" height="${plotBottom - plotTop}" ` +
    `fill="none" stroke="#333"/>`);
  svg.text(barX + 18, plotTop + 10, "0 dB");
  svg.text(barX + 18, plotBottom, `${floor} dB`);
  return svg.finish();
}

export function renderFigure(spec: FigureSpec): string {
  switch (spec.kind) {
    case "ccdf":
      return renderCurveFigure({ yLabel: "tail probability", xLabel: "PAPR threshold (dB)", ...spec },
        true, 1e-6);
    case "ber":
      return renderCurveFigure({ yLabel: "bit error rate", ...spec }, true, 1e-7);
    case "nrmse":
      return renderCurveFigure({ yLabel: "NRMSE", ...spec }, true, 1e-8);
    case "psd":
      return renderCurveFigure({ yLabel: "PSD", xLabel: "frequency (Hz)", ...spec }, true);
    case "chirp-compression":
      return renderCurveFigure({ yLabel: "normalized magnitude", xLabel: "delay / T", ...spec },
        true, 1e-6);
    case "ambiguity":
      return renderAmbiguity(spec);
  }
}
