/**
 * The adapted operating-curve figure: per-scan-averaged sensitivity against
 * mean false positives per scan, traced over the threshold grid, with one
 * highlighted dot per calibration strategy at its chosen threshold.
 */

import { Table, numericColumn, requireColumns } from "./csv.js";
import { strategyColor } from "./palette.js";
import { Frame, axes, escapeXml, fmt, linearScale, niceTicks, svgDocument } from "./svg.js";

export const CURVE_COLUMNS = ["lambda", "sensitivity_prc", "fp_froc"];
export const MARKER_COLUMNS = ["strategy", "lambda_hat", "sensitivity_prc", "fp_froc"];

export interface Marker {
  strategy: string;
  lambdaHat: number;
  sensitivity: number;
  fp: number;
}

export function readMarkers(table: Table): Marker[] {
  const at = requireColumns(table, MARKER_COLUMNS);
  const seen = new Set<string>();
  const markers: Marker[] = [];
  for (const row of table.rows) {
    const strategy = row[at.strategy];
    if (seen.has(strategy)) continue; // one legend entry and one dot per strategy
    seen.add(strategy);
    markers.push({
      strategy,
      lambdaHat: Number(row[at.lambda_hat]),
      sensitivity: Number(row[at.sensitivity_prc]),
      fp: Number(row[at.fp_froc]),
    });
  }
  return markers;
}

export function buildFrocSvg(curve: Table, markerTable: Table): string {
  requireColumns(curve, CURVE_COLUMNS);
  const sens = numericColumn(curve, "sensitivity_prc");
  const fp = numericColumn(curve, "fp_froc");
  const markers = readMarkers(markerTable);

  const width = 560;
  const height = 420;
  const frame: Frame = { x: 64, y: 24, width: width - 94, height: height - 94 };

  const fpMax = Math.max(...fp, ...markers.map((m) => m.fp), 1e-9);
  const xScale = linearScale([0, fpMax], [frame.x, frame.x + frame.width]);
  const yScale = linearScale([0, 1], [frame.y + frame.height, frame.y]);

  const parts: string[] = [];
  parts.push(axes(
    frame, xScale, yScale,
    niceTicks(0, fpMax, 6), niceTicks(0, 1, 6),
    "false positives per scan", "sensitivity per scan",
  ));

  // points arrive in threshold order, which traces the curve monotonically
  const path = fp.map((v, i) => `${fmt(xScale(v))},${fmt(yScale(sens[i]))}`).join(" ");
  if (fp.length === 1) {
    parts.push(`<circle cx="${fmt(xScale(fp[0]))}" cy="${fmt(yScale(sens[0]))}" r="3" fill="#555"/>`);
  } else {
    parts.push(`<polyline points="${path}" fill="none" stroke="#555" stroke-width="1.5"/>`);
  }

  for (const m of markers) {
    const color = strategyColor(m.strategy);
    parts.push(
      `<circle cx="${fmt(xScale(m.fp))}" cy="${fmt(yScale(m.sensitivity))}" r="5" fill="${color}" stroke="#222" stroke-width="0.8">` +
      `<title>${escapeXml(`${m.strategy}: threshold ${m.lambdaHat}`)}</title></circle>`,
    );
  }

  // legend, one row per strategy
  const legendX = frame.x + frame.width - 128;
  let legendY = frame.y + 10;
  parts.push(`<rect x="${fmt(legendX - 10)}" y="${fmt(legendY - 12)}" width="138" height="${markers.length * 16 + 10}" fill="white" stroke="#bbb" stroke-width="0.5"/>`);
  for (const m of markers) {
    parts.push(
      `<circle cx="${fmt(legendX)}" cy="${fmt(legendY)}" r="4" fill="${strategyColor(m.strategy)}"/>`,
      `<text x="${fmt(legendX + 10)}" y="${fmt(legendY + 3)}" font-size="10" fill="#111" class="legend-entry">${escapeXml(m.strategy)} (t=${escapeXml(String(m.lambdaHat))})</text>`,
    );
    legendY += 16;
  }

  return svgDocument(width, height, parts.join("\n"));
}
