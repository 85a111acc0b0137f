/** Fixed strategy colors so the same strategy looks the same in every figure. */

const STRATEGY_COLORS: Record<string, string> = {
  naive: "#1f77b4",
  froc: "#ff7f0e",
  crc: "#2ca02c",
};

const FALLBACK = ["#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"];

export function strategyColor(name: string): string {
  const known = STRATEGY_COLORS[name.toLowerCase()];
  if (known) return known;
  let hash = 0;
  for (const ch of name) {
    hash = (hash * 31 + ch.charCodeAt(0)) >>> 0;
  }
  return FALLBACK[hash % FALLBACK.length];
}
