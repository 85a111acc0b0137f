/**
 * Histogram grid: one facet per (dataset, metric), normalized bar heights
 * per strategy overlaid with transparency, per-strategy totals annotated in
 * the facet corner.
 */

import { SchemaError, Table, requireColumns } from "./csv.js";
import { strategyColor } from "./palette.js";
import { Frame, axes, escapeXml, fmt, linearScale, niceTicks, svgDocument } from "./svg.js";

export const HISTOGRAM_COLUMNS = ["dataset", "strategy", "metric", "bin_left", "bin_right", "height"];

interface Bin {
  left: number;
  right: number;
  height: number;
}

export interface HistogramData {
  datasets: string[];
  metrics: string[];
  strategies: string[];
  bins: Map<string, Bin[]>; // key: dataset|metric|strategy
}

const key = (dataset: string, metric: string, strategy: string) => `${dataset}|${metric}|${strategy}`;

export function readHistograms(table: Table): HistogramData {
  const at = requireColumns(table, HISTOGRAM_COLUMNS);
  const datasets: string[] = [];
  const metrics: string[] = [];
  const strategies: string[] = [];
  const bins = new Map<string, Bin[]>();
  for (const [i, row] of table.rows.entries()) {
    const dataset = row[at.dataset];
    const metric = row[at.metric];
    const strategy = row[at.strategy];
    const bin = {
      left: Number(row[at.bin_left]),
      right: Number(row[at.bin_right]),
      height: Number(row[at.height]),
    };
    if (!Number.isFinite(bin.left) || !Number.isFinite(bin.right) || !Number.isFinite(bin.height)) {
      throw new SchemaError(`${table.source}: row ${i + 2}: non-numeric bin`);
    }
    if (!datasets.includes(dataset)) datasets.push(dataset);
    if (!metrics.includes(metric)) metrics.push(metric);
    if (!strategies.includes(strategy)) strategies.push(strategy);
    const k = key(dataset, metric, strategy);
    if (!bins.has(k)) bins.set(k, []);
    bins.get(k)!.push(bin);
  }
  return { datasets, metrics, strategies, bins };
}

/** Sum of normalized heights per (dataset, metric, strategy) facet entry. */
export function facetTotals(data: HistogramData): Map<string, number> {
  const totals = new Map<string, number>();
  for (const [k, binList] of data.bins) {
    totals.set(k, binList.reduce((acc, b) => acc + b.height, 0));
  }
  return totals;
}

const FACET_W = 190;
const FACET_H = 150;
const MARGIN_LEFT = 70;
const MARGIN_TOP = 34;

export function buildHistogramGridSvg(table: Table): string {
  const data = readHistograms(table);
  if (data.datasets.length === 0) {
    throw new SchemaError(`${table.source}: no histogram rows`);
  }
  const width = MARGIN_LEFT + data.metrics.length * FACET_W + 20;
  const height = MARGIN_TOP + data.datasets.length * FACET_H + 50;
  const parts: string[] = [];

  for (const [col, metric] of data.metrics.entries()) {
    parts.push(
      `<text x="${fmt(MARGIN_LEFT + col * FACET_W + (FACET_W - 40) / 2)}" y="${fmt(MARGIN_TOP - 12)}" font-size="12" text-anchor="middle" fill="#111">${escapeXml(metric)}</text>`,
    );
  }

  for (const [row, dataset] of data.datasets.entries()) {
    parts.push(
      `<text x="14" y="${fmt(MARGIN_TOP + row * FACET_H + (FACET_H - 40) / 2)}" font-size="12" fill="#111" transform="rotate(-90 14 ${fmt(MARGIN_TOP + row * FACET_H + (FACET_H - 40) / 2)})" text-anchor="middle">${escapeXml(dataset)}</text>`,
    );
    for (const [col, metric] of data.metrics.entries()) {
      const frame: Frame = {
        x: MARGIN_LEFT + col * FACET_W,
        y: MARGIN_TOP + row * FACET_H,
        width: FACET_W - 40,
        height: FACET_H - 40,
      };
      const facetBins = data.strategies
        .map((s) => ({ strategy: s, bins: data.bins.get(key(dataset, metric, s)) ?? [] }))
        .filter((e) => e.bins.length > 0);
      if (facetBins.length === 0) continue;

      const lo = Math.min(...facetBins.flatMap((e) => e.bins.map((b) => b.left)));
      const hi = Math.max(...facetBins.flatMap((e) => e.bins.map((b) => b.right)));
      const peak = Math.max(...facetBins.flatMap((e) => e.bins.map((b) => b.height)), 1e-9);
      const xScale = linearScale([lo, hi], [frame.x, frame.x + frame.width]);
      const yScale = linearScale([0, peak], [frame.y + frame.height, frame.y]);

      parts.push(axes(
        frame, xScale, yScale,
        niceTicks(lo, hi, 3), niceTicks(0, peak, 3),
        "", row === data.datasets.length - 1 && col === 0 ? "share of splits" : "",
      ));

      for (const entry of facetBins) {
        const color = strategyColor(entry.strategy);
        for (const b of entry.bins) {
          if (b.height <= 0) continue;
          const x0 = xScale(b.left);
          const x1 = xScale(b.right);
          const y = yScale(b.height);
          parts.push(
            `<rect x="${fmt(x0)}" y="${fmt(y)}" width="${fmt(Math.max(x1 - x0, 0.5))}" height="${fmt(frame.y + frame.height - y)}" fill="${color}" fill-opacity="0.55"/>`,
          );
        }
      }

      // per-strategy totals annotated in the facet corner
      let ty = frame.y + 9;
      for (const entry of facetBins) {
        const total = entry.bins.reduce((acc, b) => acc + b.height, 0);
        parts.push(
          `<text x="${fmt(frame.x + frame.width - 2)}" y="${fmt(ty)}" font-size="8" text-anchor="end" fill="${strategyColor(entry.strategy)}" class="facet-total">${escapeXml(`${entry.strategy} sum=${total.toFixed(3)}`)}</text>`,
        );
        ty += 9;
      }
    }
  }

  // shared legend at the bottom
  let lx = MARGIN_LEFT;
  const ly = height - 16;
  for (const s of data.strategies) {
    parts.push(
      `<rect x="${fmt(lx)}" y="${fmt(ly - 8)}" width="10" height="10" fill="${strategyColor(s)}" fill-opacity="0.55"/>`,
      `<text x="${fmt(lx + 14)}" y="${fmt(ly)}" font-size="11" fill="#111" class="legend-entry">${escapeXml(s)}</text>`,
    );
    lx += 14 + 8 * s.length + 24;
  }

  return svgDocument(width, height, parts.join("\n"));
}
