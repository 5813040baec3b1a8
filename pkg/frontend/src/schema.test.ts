import { describe, expect, it } from "vitest";

import { CSV_COLUMNS, parseSweepCsv, SchemaError } from "./schema.js";

const HEADER = CSV_COLUMNS.join(",");

function row(overrides: Partial<Record<string, string>> = {}): string {
  const base: Record<string, string> = {
    mechanism: "direct",
    n: "1000000",
    d: "100",
    d_a: "50",
    u: "1",
    param: "p",
    param_value: "1000",
    epsilon: "7.601402334583733",
    delta: "0",
    cm_records: "1000",
    cp_accesses: "1000",
    eps_empirical: "",
    eps_ci_low: "",
    eps_ci_high: "",
    verdict: "",
  };
  return CSV_COLUMNS.map((c) => overrides[c] ?? base[c]).join(",");
}

describe("parseSweepCsv", () => {
  it("parses conforming rows", () => {
    const rows = parseSweepCsv([HEADER, row(), row({ d_a: "99", epsilon: "11.5" })].join("\n"));
    expect(rows).toHaveLength(2);
    expect(rows[0].epsilon).toBeCloseTo(7.6014, 3);
    expect(rows[1].d_a).toBe("99");
  });

  it("parses the inf sentinel", () => {
    const rows = parseSweepCsv([HEADER, row({ epsilon: "inf" })].join("\n"));
    expect(rows[0].epsilon).toBe(Infinity);
  });

  it("rejects a wrong header with a column diagnostic", () => {
    const bad = HEADER.replace("epsilon", "eps");
    expect(() => parseSweepCsv([bad, row()].join("\n"))).toThrowError(/missing: epsilon/);
  });

  it("rejects extra columns", () => {
    expect(() => parseSweepCsv([HEADER + ",bonus", row() + ",1"].join("\n"))).toThrowError(
      /unexpected: bonus/
    );
  });

  it("rejects empty input", () => {
    expect(() => parseSweepCsv("")).toThrowError(SchemaError);
  });

  it("rejects a header with no data rows", () => {
    expect(() => parseSweepCsv(HEADER)).toThrowError(/no data rows/);
  });

  it("rejects short rows with the line number", () => {
    expect(() => parseSweepCsv([HEADER, "direct,1,2"].join("\n"))).toThrowError(/line 2/);
  });

  it("rejects non-numeric cells naming the column", () => {
    expect(() => parseSweepCsv([HEADER, row({ epsilon: "oops" })].join("\n"))).toThrowError(
      /'epsilon'/
    );
  });
});
