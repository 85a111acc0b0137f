/**
 * Deterministic SVG assembly: fixed-precision coordinates, no timestamps,
 * no randomness, so identical inputs produce byte-identical files.
 */

export function fmt(v: number): string {
  // enough precision for crisp layout, short enough to stay readable
  const s = v.toFixed(2);
  return s === "-0.00" ? "0.00" : s;
}

export function escapeXml(s: string): string {
  return s
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export type Scale = (v: number) => number;

export function linearScale(domain: [number, number], range: [number, number]): Scale {
  const [d0, d1] = domain;
  const [r0, r1] = range;
  const span = d1 - d0;
  if (span === 0) {
    const mid = (r0 + r1) / 2;
    return () => mid;
  }
  return (v: number) => r0 + ((v - d0) / span) * (r1 - r0);
}

/** Round-number tick positions covering [lo, hi]. */
export function niceTicks(lo: number, hi: number, count = 5): number[] {
  if (hi === lo) {
    return [lo];
  }
  const rawStep = (hi - lo) / Math.max(count - 1, 1);
  const power = Math.pow(10, Math.floor(Math.log10(rawStep)));
  const candidates = [1, 2, 2.5, 5, 10].map((m) => m * power);
  const step = candidates.find((s) => s >= rawStep) ?? candidates[candidates.length - 1];
  const start = Math.ceil(lo / step) * step;
  const ticks: number[] = [];
  for (let v = start; v <= hi + step * 1e-9; v += step) {
    ticks.push(Math.abs(v) < step * 1e-9 ? 0 : v);
  }
  return ticks;
}

export function tickLabel(v: number): string {
  if (v === 0) return "0";
  const abs = Math.abs(v);
  if (abs >= 100) return v.toFixed(0);
  if (abs >= 1) return String(Number(v.toFixed(2)));
  return String(Number(v.toFixed(3)));
}

export interface Frame {
  x: number;
  y: number;
  width: number;
  height: number;
}

/** Axis lines, ticks, and labels for one plot frame. */
export function axes(
  frame: Frame,
  xScale: Scale,
  yScale: Scale,
  xTicks: number[],
  yTicks: number[],
  xLabel: string,
  yLabel: string,
): string {
  const parts: string[] = [];
  const bottom = frame.y + frame.height;
  parts.push(
    `<line x1="${fmt(frame.x)}" y1="${fmt(bottom)}" x2="${fmt(frame.x + frame.width)}" y2="${fmt(bottom)}" stroke="#333" stroke-width="1"/>`,
    `<line x1="${fmt(frame.x)}" y1="${fmt(frame.y)}" x2="${fmt(frame.x)}" y2="${fmt(bottom)}" stroke="#333" stroke-width="1"/>`,
  );
  for (const t of xTicks) {
    const x = xScale(t);
    parts.push(
      `<line x1="${fmt(x)}" y1="${fmt(bottom)}" x2="${fmt(x)}" y2="${fmt(bottom + 4)}" stroke="#333" stroke-width="1"/>`,
      `<text x="${fmt(x)}" y="${fmt(bottom + 16)}" font-size="10" text-anchor="middle" fill="#333">${escapeXml(tickLabel(t))}</text>`,
    );
  }
  for (const t of yTicks) {
    const y = yScale(t);
    parts.push(
      `<line x1="${fmt(frame.x - 4)}" y1="${fmt(y)}" x2="${fmt(frame.x)}" y2="${fmt(y)}" stroke="#333" stroke-width="1"/>`,
      `<text x="${fmt(frame.x - 7)}" y="${fmt(y + 3)}" font-size="10" text-anchor="end" fill="#333">${escapeXml(tickLabel(t))}</text>`,
    );
  }
  parts.push(
    `<text x="${fmt(frame.x + frame.width / 2)}" y="${fmt(bottom + 32)}" font-size="11" text-anchor="middle" fill="#111">${escapeXml(xLabel)}</text>`,
    `<text x="${fmt(frame.x - 38)}" y="${fmt(frame.y + frame.height / 2)}" font-size="11" text-anchor="middle" fill="#111" transform="rotate(-90 ${fmt(frame.x - 38)} ${fmt(frame.y + frame.height / 2)})">${escapeXml(yLabel)}</text>`,
  );
  return parts.join("\n");
}

export function svgDocument(width: number, height: number, body: string): string {
  return [
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" viewBox="0 0 ${width} ${height}">`,
    `<rect width="${width}" height="${height}" fill="white"/>`,
    body,
    `</svg>`,
    ``,
  ].join("\n");
}
