/**
 * CSV parsing against the pipeline's registered schemas.
 *
 * Mirrors the producer's conventions: '.' decimal point, repr-style floats
 * ('inf', '-inf', 'nan' spellings), 'true'/'false' booleans, '\n' endings.
 * Validation failures name the offending column and row.
 */

export type CellType = "float" | "int" | "str" | "bool";
export type Cell = number | string | boolean | null;
export type Row = Record<string, Cell>;

export class SchemaError extends Error {}

const SCHEMAS: Record<string, Array<[string, CellType]>> = {
  curves: [
    ["d", "int"],
    ["rho", "float"],
    ["trials", "int"],
    ["tau_star", "float"],
    ["ln_tau", "float"],
    ["median_signal", "float"],
  ],
  scaling: [
    ["row_type", "str"],
    ["d", "int"],
    ["inv_sqrt_d", "float"],
    ["fwhm", "float"],
    ["slope", "float"],
    ["intercept", "float"],
    ["r_squared", "float"],
  ],
  windows: [
    ["kind", "str"],
    ["d", "int"],
    ["gamma", "float"],
    ["regime", "str"],
    ["p", "float"],
    ["eps_err", "float"],
    ["c_constant", "float"],
    ["tau", "float"],
    ["tau_tilde", "float"],
    ["kappa_minus", "float"],
    ["kappa_plus", "float"],
    ["width", "float"],
    ["is_empty", "bool"],
    ["i_hat", "float"],
    ["i_std_err", "float"],
    ["log_lambda", "float"],
    ["threshold_method", "str"],
    ["h_value", "float"],
    ["e_med", "float"],
    ["e_big", "float"],
    ["delta", "float"],
  ],
  coupling: [
    ["seed", "int"],
    ["rate", "float"],
    ["q", "int"],
    ["t_or_inf", "float"],
    ["outputs_equal", "bool"],
    ["a_set_hit_null", "bool"],
    ["a_set_hit_planted", "bool"],
  ],
};

// columns allowed to be empty (scaling point rows lack fit cells and vice versa)
const OPTIONAL: Record<string, Set<string>> = {
  scaling: new Set(["d", "inv_sqrt_d", "fwhm", "slope", "intercept", "r_squared"]),
};

const INT_RE = /^-?\d+$/;
const FLOAT_RE = /^-?(\d+(\.\d*)?|\.\d+)(e[+-]?\d+)?$/i;

function parseCell(cell: string, kind: CellType, col: string, row: number): Cell {
  switch (kind) {
    case "str":
      return cell;
    case "int":
      if (!INT_RE.test(cell)) {
        throw new SchemaError(`column '${col}' row ${row}: expected integer, got '${cell}'`);
      }
      return parseInt(cell, 10);
    case "float": {
      if (cell === "inf") return Infinity;
      if (cell === "-inf") return -Infinity;
      if (cell === "nan") return NaN;
      if (!FLOAT_RE.test(cell)) {
        throw new SchemaError(`column '${col}' row ${row}: expected float, got '${cell}'`);
      }
      return parseFloat(cell);
    }
    case "bool":
      if (cell === "true") return true;
      if (cell === "false") return false;
      throw new SchemaError(`column '${col}' row ${row}: expected true/false, got '${cell}'`);
  }
}

export interface ParsedCsv {
  schema: string;
  rows: Row[];
}

/** Match the header against the registry and type every cell. */
export function parseCsv(text: string): ParsedCsv {
  const lines = text.split("\n");
  while (lines.length > 0 && lines[lines.length - 1] === "") lines.pop();
  if (lines.length === 0) throw new SchemaError("empty file: no header row");

  const header = lines[0].split(",");
  const schema = Object.keys(SCHEMAS).find(
    (name) => SCHEMAS[name].length === header.length && SCHEMAS[name].every(([c], i) => c === header[i]),
  );
  if (schema === undefined) {
    throw new SchemaError(`header '${lines[0]}' matches no known schema`);
  }
  const cols = SCHEMAS[schema];
  const optional = OPTIONAL[schema] ?? new Set<string>();
  const rows: Row[] = [];
  for (let r = 1; r < lines.length; r++) {
    const cells = lines[r].split(",");
    if (cells.length !== cols.length) {
      throw new SchemaError(`row ${r}: expected ${cols.length} cells, got ${cells.length}`);
    }
    const row: Row = {};
    for (let i = 0; i < cols.length; i++) {
      const [col, kind] = cols[i];
      if (cells[i] === "") {
        if (!optional.has(col)) {
          throw new SchemaError(`column '${col}' row ${r}: empty value not allowed`);
        }
        row[col] = null;
      } else {
        row[col] = parseCell(cells[i], kind, col, r);
      }
    }
    rows.push(row);
  }
  return { schema, rows };
}

/** Parse and insist the file carries the schema a panel needs. */
export function parseAs(text: string, schema: string): Row[] {
  const parsed = parseCsv(text);
  if (parsed.schema !== schema) {
    throw new SchemaError(`expected a '${schema}' file, got '${parsed.schema}'`);
  }
  return parsed.rows;
}
