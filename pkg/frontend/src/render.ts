/**
 * CLI: render <csv> <figure-id> <out-svg>
 *
 * Reads one sweep CSV produced by the analysis CLI and writes one SVG.
 * Schema violations exit nonzero with a column diagnostic and write
 * nothing.
 */

import { readFileSync, writeFileSync } from "node:fs";

import { buildCurves, FIGURES } from "./figures.js";
import { parseSweepCsv, SchemaError } from "./schema.js";
import { renderSvg } from "./svg.js";

export function renderFigure(csvText: string, figureId: string): string {
  const spec = FIGURES[figureId];
  if (!spec) {
    throw new SchemaError(
      `unknown figure id '${figureId}' (expected one of ${Object.keys(FIGURES).join(", ")})`
    );
  }
  const rows = parseSweepCsv(csvText);
  const curves = buildCurves(rows, spec);
  const first = rows[0];
  const subtitle = `n=${"" + readColumn(csvText, "n")}  d=${readColumn(csvText, "d")}  u=${readColumn(csvText, "u")}  sweep=${first.param}`;
  return renderSvg(spec, curves, subtitle);
}

function readColumn(csvText: string, name: string): string {
  const lines = csvText.trim().split("\n");
  const idx = lines[0].split(",").indexOf(name);
  const values = new Set(lines.slice(1).map((l) => l.split(",")[idx]));
  return values.size === 1 ? [...values][0] : "varied";
}

export function main(argv: string[]): number {
  if (argv.length !== 3) {
    process.stderr.write("usage: render <csv> <figure-id> <out-svg>\n");
    return 2;
  }
  const [csvPath, figureId, outPath] = argv;
  let text: string;
  try {
    text = readFileSync(csvPath, "utf-8");
  } catch (err) {
    process.stderr.write(`cannot read ${csvPath}: ${(err as Error).message}\n`);
    return 1;
  }
  let svg: string;
  try {
    svg = renderFigure(text, figureId);
  } catch (err) {
    process.stderr.write(`render failed: ${(err as Error).message}\n`);
    return 1;
  }
  writeFileSync(outPath, svg);
  process.stderr.write(`wrote ${outPath}\n`);
  return 0;
}

const entry = process.argv[1] ?? "";
if (entry.endsWith("render.js") || entry.endsWith("render.ts")) {
  process.exit(main(process.argv.slice(2)));
}
