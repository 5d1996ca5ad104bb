/**
 * CSV tables as written by the simulation pipeline: one header row, numeric
 * columns.  Columns are accessed by name and missing columns are refused --
 * a figure never fabricates a series.
 */

export interface Table {
  header: string[];
  columns: Map<string, Float64Array>;
  rows: number;
}

export function parseCsv(text: string, path = "<csv>"): Table {
  const lines = text.split(/\r?\n/).filter((line) => line.length > 0);
  if (lines.length === 0) throw new Error(`${path}: empty file`);
  const header = lines[0].split(",").map((h) => h.trim());
  const rows = lines.length - 1;
  const data = header.map(() => new Float64Array(rows));
  for (let i = 0; i < rows; i++) {
    const parts = lines[i + 1].split(",");
    if (parts.length !== header.length) {
      throw new Error(`${path}: row ${i + 2} has ${parts.length} fields, expected ${header.length}`);
    }
    for (let j = 0; j < header.length; j++) {
      const v = Number(parts[j]);
      if (Number.isNaN(v)) throw new Error(`${path}: non-numeric value at row ${i + 2}, column ${header[j]}`);
      data[j][i] = v;
    }
  }
  const columns = new Map<string, Float64Array>();
  header.forEach((name, j) => columns.set(name, data[j]));
  return { header, columns, rows };
}

export function column(table: Table, name: string, path = "<csv>"): Float64Array {
  const col = table.columns.get(name);
  if (col === undefined) {
    throw new Error(`${path}: required column ${JSON.stringify(name)} is absent ` +
      `(have: ${table.header.join(", ")})`);
  }
  return col;
}

/** Values of a raveled square grid (im rows ascending, re fast) as a matrix. */
export interface Grid2D {
  re: Float64Array;   // ascending axis values, length n
  im: Float64Array;
  values: Float64Array; // row-major [im][re]
  n: number;
}

export function gridFromTable(table: Table, xName: string, yName: string,
                              vName: string, path = "<csv>"): Grid2D {
  const x = column(table, xName, path);
  const y = column(table, yName, path);
  const v = column(table, vName, path);
  const n = Math.round(Math.sqrt(table.rows));
  if (n * n !== table.rows) throw new Error(`${path}: ${table.rows} rows is not a square grid`);
  const re = new Float64Array(n);
  const im = new Float64Array(n);
  for (let j = 0; j < n; j++) re[j] = x[j];
  for (let i = 0; i < n; i++) im[i] = y[i * n];
  for (let i = 0; i < n; i++) {
    for (let j = 0; j < n; j++) {
      if (x[i * n + j] !== re[j] || y[i * n + j] !== im[i]) {
        throw new Error(`${path}: grid is not raveled row-major`);
      }
    }
  }
  return { re, im, values: Float64Array.from(v), n };
}
