/**
 * Minimal CSV reading for the harness output schemas. Values never contain
 * commas or quotes (fixed decimal numbers and identifier-like names), so a
 * plain split is exact.
 */

export interface Table {
  header: string[];
  rows: string[][];
  source: string;
}

export class SchemaError extends Error {}

export function parseCsv(text: string, source = "<csv>"): Table {
  const lines = text.split(/\r?\n/).filter((line) => line.length > 0);
  if (lines.length === 0) {
    throw new SchemaError(`${source}: empty CSV`);
  }
  const header = lines[0].split(",");
  const rows = lines.slice(1).map((line, i) => {
    const cells = line.split(",");
    if (cells.length !== header.length) {
      throw new SchemaError(
        `${source}: row ${i + 2} has ${cells.length} fields, expected ${header.length}`,
      );
    }
    return cells;
  });
  return { header, rows, source };
}

/** Map required column names to indices; names any missing column. */
export function requireColumns(table: Table, columns: string[]): Record<string, number> {
  const index: Record<string, number> = {};
  for (const name of columns) {
    const at = table.header.indexOf(name);
    if (at < 0) {
      throw new SchemaError(`${table.source}: missing column "${name}" (header: ${table.header.join(",")})`);
    }
    index[name] = at;
  }
  return index;
}

export function numericColumn(table: Table, name: string): number[] {
  const at = requireColumns(table, [name])[name];
  return table.rows.map((row, i) => {
    const v = Number(row[at]);
    if (!Number.isFinite(v)) {
      throw new SchemaError(`${table.source}: row ${i + 2}, column "${name}" is not a number: ${row[at]}`);
    }
    return v;
  });
}

/** True when the file's header matches the expected columns exactly. */
export function headerMatches(table: Table, columns: string[]): boolean {
  return table.header.length === columns.length && columns.every((c, i) => table.header[i] === c);
}
