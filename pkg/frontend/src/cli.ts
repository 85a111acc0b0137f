/**
 * confdet-plots: render harness CSVs as SVG.
 *
 *   render --kind froc --in curve.csv --in curve_markers.csv --out figure.svg
 *   render --kind hist --in histograms.csv --out grid.svg
 *
 * Inputs are classified by header, so the two froc files may be given in any
 * order. Exit 0 on success, 1 on data errors (message on stderr), 2 on usage
 * errors.
 */

import { readFileSync, writeFileSync } from "node:fs";
import { parseArgs } from "node:util";

import { SchemaError, Table, headerMatches, parseCsv } from "./csv.js";
import { CURVE_COLUMNS, MARKER_COLUMNS, buildFrocSvg } from "./froc.js";
import { HISTOGRAM_COLUMNS, buildHistogramGridSvg } from "./hist.js";

export class UsageError extends Error {}

function loadTables(paths: string[]): Table[] {
  return paths.map((p) => parseCsv(readFileSync(p, "utf-8"), p));
}

export function renderFroc(tables: Table[]): string {
  const curve = tables.find((t) => headerMatches(t, CURVE_COLUMNS));
  const markers = tables.find((t) => headerMatches(t, MARKER_COLUMNS));
  if (!curve) {
    throw new SchemaError(
      `no curve CSV among inputs (expected header: ${CURVE_COLUMNS.join(",")})`,
    );
  }
  if (!markers) {
    throw new SchemaError(
      `no marker CSV among inputs (expected header: ${MARKER_COLUMNS.join(",")})`,
    );
  }
  return buildFrocSvg(curve, markers);
}

export function renderHist(tables: Table[]): string {
  if (tables.length !== 1) {
    throw new UsageError(`--kind hist takes exactly one --in CSV, got ${tables.length}`);
  }
  return buildHistogramGridSvg(tables[0]);
}

export function run(argv: string[]): number {
  try {
    const { values, positionals } = parseArgs({
      args: argv,
      options: {
        kind: { type: "string" },
        in: { type: "string", multiple: true },
        out: { type: "string" },
      },
      allowPositionals: true,
    });
    const command = positionals[0] ?? "render";
    if (command !== "render") {
      throw new UsageError(`unknown command "${command}" (only: render)`);
    }
    if (values.kind !== "froc" && values.kind !== "hist") {
      throw new UsageError(`--kind must be froc or hist, got ${values.kind ?? "(missing)"}`);
    }
    const inputs = values.in ?? [];
    if (inputs.length === 0) {
      throw new UsageError("at least one --in CSV is required");
    }
    if (!values.out) {
      throw new UsageError("--out is required");
    }
    const tables = loadTables(inputs);
    const svg = values.kind === "froc" ? renderFroc(tables) : renderHist(tables);
    writeFileSync(values.out, svg, "utf-8");
    process.stdout.write(`wrote ${values.out}\n`);
    return 0;
  } catch (err) {
    if (err instanceof UsageError || (err as { code?: string }).code === "ERR_PARSE_ARGS_UNKNOWN_OPTION") {
      process.stderr.write(`usage error: ${(err as Error).message}\n`);
      return 2;
    }
    process.stderr.write(`error: ${(err as Error).message}\n`);
    return 1;
  }
}

const invokedDirectly = process.argv[1] !== undefined && import.meta.url.endsWith(
  process.argv[1].split("/").pop() ?? "",
);
if (invokedDirectly) {
  process.exit(run(process.argv.slice(2)));
}
