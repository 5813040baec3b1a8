/**
 * Figure presets: which columns feed the axes, how curves are grouped,
 * and whether parameter dots are drawn along each curve.
 */

import { SweepRow } from "./schema.js";

export interface FigureSpec {
  id: string;
  title: string;
  xColumn: keyof Pick<SweepRow, "param_value" | "cp_accesses" | "cm_records">;
  yColumn: "epsilon" | "delta";
  xLabel: string;
  yLabel: string;
  /** curves are one-per-value of this column */
  groupBy: "d_a" | "mechanism";
  xLog: boolean;
  /** mark every point along the curve (cost-versus-privacy presets) */
  paramDots: boolean;
}

const P_SWEEP = {
  xColumn: "param_value" as const,
  xLabel: "requests per query p",
  xLog: true,
};
const THETA_SWEEP = {
  xColumn: "param_value" as const,
  xLabel: "request-vector density theta",
  xLog: false,
};

export const FIGURES: Record<string, FigureSpec> = {
  fig1: {
    id: "fig1",
    title: "Direct requests: epsilon versus p",
    ...P_SWEEP,
    yColumn: "epsilon",
    yLabel: "epsilon",
    groupBy: "d_a",
    paramDots: false,
  },
  fig2: {
    id: "fig2",
    title: "Bundled anonymous requests: epsilon versus p",
    ...P_SWEEP,
    yColumn: "epsilon",
    yLabel: "epsilon",
    groupBy: "d_a",
    paramDots: false,
  },
  fig3: {
    id: "fig3",
    title: "Sparse vectors: epsilon versus theta",
    ...THETA_SWEEP,
    yColumn: "epsilon",
    yLabel: "epsilon",
    groupBy: "d_a",
    paramDots: false,
  },
  fig4: {
    id: "fig4",
    title: "Anonymous sparse vectors: epsilon versus theta",
    ...THETA_SWEEP,
    yColumn: "epsilon",
    yLabel: "epsilon",
    groupBy: "d_a",
    paramDots: false,
  },
  fig5: {
    id: "fig5",
    title: "Subset queries: delta versus t",
    xColumn: "param_value",
    xLabel: "servers contacted t",
    xLog: false,
    yColumn: "delta",
    yLabel: "delta",
    groupBy: "d_a",
    paramDots: false,
  },
  fig6a: {
    id: "fig6a",
    title: "Computation cost versus epsilon",
    xColumn: "cp_accesses",
    xLabel: "records accessed per query",
    xLog: true,
    yColumn: "epsilon",
    yLabel: "epsilon",
    groupBy: "mechanism",
    paramDots: true,
  },
  fig6b: {
    id: "fig6b",
    title: "Communication cost versus epsilon",
    xColumn: "cm_records",
    xLabel: "record blocks sent per query",
    xLog: true,
    yColumn: "epsilon",
    yLabel: "epsilon",
    groupBy: "mechanism",
    paramDots: true,
  },
  fig6c: {
    id: "fig6c",
    title: "Computation cost versus epsilon (anonymized)",
    xColumn: "cp_accesses",
    xLabel: "records accessed per query",
    xLog: true,
    yColumn: "epsilon",
    yLabel: "epsilon",
    groupBy: "mechanism",
    paramDots: true,
  },
  fig6d: {
    id: "fig6d",
    title: "Communication cost versus epsilon (anonymized)",
    xColumn: "cm_records",
    xLabel: "record blocks sent per query",
    xLog: true,
    yColumn: "epsilon",
    yLabel: "epsilon",
    groupBy: "mechanism",
    paramDots: true,
  },
};

export interface Curve {
  label: string;
  points: Array<{ x: number; y: number }>;
}

/** Group rows into curves and order points along the sweep parameter. */
export function buildCurves(rows: SweepRow[], spec: FigureSpec): Curve[] {
  const groups = new Map<string, SweepRow[]>();
  for (const row of rows) {
    const key = spec.groupBy === "d_a" ? row.d_a : row.mechanism;
    const bucket = groups.get(key);
    if (bucket) bucket.push(row);
    else groups.set(key, [row]);
  }
  const curves: Curve[] = [];
  for (const key of [...groups.keys()].sort()) {
    const bucket = groups.get(key)!;
    bucket.sort((a, b) => a.param_value - b.param_value);
    const points = bucket.map((r) => ({ x: r[spec.xColumn], y: r[spec.yColumn] }));
    const label = spec.groupBy === "d_a" ? `d_a = ${key}` : key;
    curves.push({ label, points });
  }
  return curves;
}
