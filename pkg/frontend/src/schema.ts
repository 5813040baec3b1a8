/**
 * Fixed CSV schema shared with the analysis CLI. The renderer never
 * recomputes a bound: the CSV is the single source of truth.
 */

import Papa from "papaparse";

export const CSV_COLUMNS = [
  "mechanism",
  "n",
  "d",
  "d_a",
  "u",
  "param",
  "param_value",
  "epsilon",
  "delta",
  "cm_records",
  "cp_accesses",
  "eps_empirical",
  "eps_ci_low",
  "eps_ci_high",
  "verdict",
] as const;

export interface SweepRow {
  mechanism: string;
  d_a: string;
  param: string;
  param_value: number;
  epsilon: number;
  delta: number;
  cm_records: number;
  cp_accesses: number;
}

export class SchemaError extends Error {}

function parseNumber(raw: string, column: string, line: number): number {
  if (raw === "inf") return Infinity;
  const value = Number(raw);
  if (raw === "" || Number.isNaN(value)) {
    throw new SchemaError(`line ${line}: column '${column}' is not numeric: '${raw}'`);
  }
  return value;
}

/** Parse CSV text, enforcing the exact header and numeric columns. */
export function parseSweepCsv(text: string): SweepRow[] {
  const parsed = Papa.parse<string[]>(text.trim(), { skipEmptyLines: true });
  if (parsed.errors.length > 0) {
    throw new SchemaError(`CSV parse error: ${parsed.errors[0].message}`);
  }
  const lines = parsed.data;
  if (lines.length === 0) {
    throw new SchemaError("empty CSV: no header line");
  }
  const header = lines[0];
  const expected = CSV_COLUMNS as readonly string[];
  if (header.length !== expected.length || header.some((h, i) => h !== expected[i])) {
    const missing = expected.filter((c) => !header.includes(c));
    const extra = header.filter((c) => !expected.includes(c));
    const detail = [
      missing.length ? `missing: ${missing.join(", ")}` : "",
      extra.length ? `unexpected: ${extra.join(", ")}` : "",
    ]
      .filter(Boolean)
      .join("; ");
    throw new SchemaError(`header does not match the sweep schema (${detail || "column order"})`);
  }
  if (lines.length === 1) {
    throw new SchemaError("empty CSV: header but no data rows");
  }
  const rows: SweepRow[] = [];
  for (let k = 1; k < lines.length; k++) {
    const cells = lines[k];
    if (cells.length !== expected.length) {
      throw new SchemaError(`line ${k + 1}: expected ${expected.length} columns, got ${cells.length}`);
    }
    rows.push({
      mechanism: cells[0],
      d_a: cells[3],
      param: cells[5],
      param_value: parseNumber(cells[6], "param_value", k + 1),
      epsilon: parseNumber(cells[7], "epsilon", k + 1),
      delta: parseNumber(cells[8], "delta", k + 1),
      cm_records: parseNumber(cells[9], "cm_records", k + 1),
      cp_accesses: parseNumber(cells[10], "cp_accesses", k + 1),
    });
  }
  return rows;
}
