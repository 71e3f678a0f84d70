/** Minimal CSV reader for the simulator's output files.
 *
 * The producers never quote fields, so a plain comma split is exact.
 */

export interface Table {
  header: string[];
  rows: string[][];
}

export class MissingColumnError extends Error {
  constructor(column: string, available: string[]) {
    super(
      `missing column '${column}'; available columns: ${available.join(", ")}`,
    );
    this.name = "MissingColumnError";
  }
}

export function parseCsv(text: string): Table {
  const lines = text
    .split(/\r?\n/)
    .filter((line) => line.trim().length > 0);
  if (lines.length === 0) {
    throw new Error("empty CSV: no header row");
  }
  const header = lines[0].split(",").map((h) => h.trim());
  const rows = lines.slice(1).map((line, i) => {
    const cells = line.split(",").map((c) => c.trim());
    if (cells.length !== header.length) {
      throw new Error(
        `row ${i + 2} has ${cells.length} cells, header has ${header.length}`,
      );
    }
    return cells;
  });
  return { header, rows };
}

export function columnIndex(table: Table, name: string): number {
  const idx = table.header.indexOf(name);
  if (idx < 0) {
    throw new MissingColumnError(name, table.header);
  }
  return idx;
}

/** Optional column: -1 when absent. */
export function optionalColumnIndex(table: Table, name: string): number {
  return table.header.indexOf(name);
}

export function numericColumn(table: Table, name: string): number[] {
  const idx = columnIndex(table, name);
  return table.rows.map((row, i) => {
    const v = Number(row[idx]);
    if (!Number.isFinite(v)) {
      throw new Error(`row ${i + 2}, column '${name}': not a number: '${row[idx]}'`);
    }
    return v;
  });
}
