/**
 * Minimal deterministic SVG line-plot builder: linear/log scales, decade
 * ticks, one path per curve, legend. No DOM, no randomness, no clock.
 */

import { Curve, FigureSpec } from "./figures.js";

const WIDTH = 840;
const HEIGHT = 560;
const MARGIN = { top: 48, right: 200, bottom: 56, left: 84 };
const PALETTE = ["#1f6fb4", "#d1495b", "#3a923a", "#8a5fb8", "#b8860b", "#4a918e"];

interface Scale {
  (v: number): number;
  ticks: number[];
  log: boolean;
}

function makeScale(min: number, max: number, rangeLo: number, rangeHi: number, log: boolean): Scale {
  if (log) {
    const lo = Math.log10(min);
    const hi = Math.log10(max);
    const span = hi - lo || 1;
    const fn = ((v: number) => rangeLo + ((Math.log10(v) - lo) / span) * (rangeHi - rangeLo)) as Scale;
    const step = Math.max(1, Math.ceil((Math.ceil(hi) - Math.floor(lo)) / 8));
    fn.ticks = [];
    for (let e = Math.ceil(lo); e <= Math.floor(hi); e += step) fn.ticks.push(10 ** e);
    if (fn.ticks.length === 0) fn.ticks = [min, max];
    fn.log = true;
    return fn;
  }
  const span = max - min || 1;
  const fn = ((v: number) => rangeLo + ((v - min) / span) * (rangeHi - rangeLo)) as Scale;
  const rawStep = span / 6;
  const mag = 10 ** Math.floor(Math.log10(rawStep));
  const step = [1, 2, 5, 10].map((m) => m * mag).find((s) => span / s <= 7) ?? mag * 10;
  fn.ticks = [];
  for (let t = Math.ceil(min / step) * step; t <= max + 1e-12 * span; t += step) {
    fn.ticks.push(Number(t.toPrecision(12)));
  }
  fn.log = false;
  return fn;
}

function fmtTick(v: number, log: boolean): string {
  if (v === 0) return "0";
  const exp = Math.log10(Math.abs(v));
  if (log || exp >= 6 || exp < -3) {
    const e = Math.round(exp);
    return Math.abs(10 ** e - v) < 1e-9 * Math.abs(v) ? `1e${e}` : v.toExponential(1);
  }
  return Number(v.toPrecision(6)).toString();
}

const esc = (s: string) => s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");

/** Decide the y-axis scale: logarithmic once the data spans >= 3 decades. */
export function wantsLogAxis(values: number[]): boolean {
  const positive = values.filter((v) => v > 0 && Number.isFinite(v));
  if (positive.length < 2) return false;
  return Math.max(...positive) / Math.min(...positive) >= 1e3;
}

export function renderSvg(spec: FigureSpec, curves: Curve[], subtitle: string): string {
  const allPoints = curves.flatMap((c) => c.points).filter((p) => Number.isFinite(p.x) && Number.isFinite(p.y));
  const yLog = wantsLogAxis(allPoints.map((p) => p.y));
  const xLog = spec.xLog && allPoints.every((p) => p.x > 0);

  // log axes cannot place non-positive values; drop them per curve
  const drawable = curves
    .map((c) => ({
      label: c.label,
      points: c.points.filter(
        (p) =>
          Number.isFinite(p.x) &&
          Number.isFinite(p.y) &&
          (!xLog || p.x > 0) &&
          (!yLog || p.y > 0)
      ),
    }))
    .filter((c) => c.points.length > 0);
  if (drawable.length === 0) {
    throw new Error("nothing to draw: no finite data points");
  }
  const xs = drawable.flatMap((c) => c.points.map((p) => p.x));
  const ys = drawable.flatMap((c) => c.points.map((p) => p.y));
  const xScale = makeScale(Math.min(...xs), Math.max(...xs), MARGIN.left, WIDTH - MARGIN.right, xLog);
  const yScale = makeScale(Math.min(...ys), Math.max(...ys), HEIGHT - MARGIN.bottom, MARGIN.top, yLog);

  const parts: string[] = [];
  parts.push(
    `<svg xmlns="http://www.w3.org/2000/svg" width="${WIDTH}" height="${HEIGHT}" viewBox="0 0 ${WIDTH} ${HEIGHT}" font-family="Helvetica, Arial, sans-serif">`
  );
  parts.push(`<rect width="${WIDTH}" height="${HEIGHT}" fill="white"/>`);
  parts.push(
    `<text x="${MARGIN.left}" y="24" font-size="16" font-weight="bold">${esc(spec.title)}</text>`
  );
  parts.push(`<text x="${MARGIN.left}" y="40" font-size="12" fill="#555">${esc(subtitle)}</text>`);

  // frame
  const x0 = MARGIN.left;
  const x1 = WIDTH - MARGIN.right;
  const y0 = HEIGHT - MARGIN.bottom;
  const y1 = MARGIN.top;
  parts.push(
    `<rect x="${x0}" y="${y1}" width="${x1 - x0}" height="${y0 - y1}" fill="none" stroke="#999"/>`
  );

  for (const t of xScale.ticks) {
    const px = xScale(t).toFixed(2);
    parts.push(`<line x1="${px}" y1="${y0}" x2="${px}" y2="${y0 + 5}" stroke="#444"/>`);
    parts.push(
      `<text x="${px}" y="${y0 + 20}" font-size="11" text-anchor="middle">${fmtTick(t, xScale.log)}</text>`
    );
  }
  for (const t of yScale.ticks) {
    const py = yScale(t).toFixed(2);
    parts.push(`<line x1="${x0 - 5}" y1="${py}" x2="${x0}" y2="${py}" stroke="#444"/>`);
    parts.push(`<line x1="${x0}" y1="${py}" x2="${x1}" y2="${py}" stroke="#eee"/>`);
    parts.push(
      `<text x="${x0 - 9}" y="${py}" font-size="11" text-anchor="end" dominant-baseline="middle">${fmtTick(t, yScale.log)}</text>`
    );
  }
  parts.push(
    `<text x="${(x0 + x1) / 2}" y="${HEIGHT - 14}" font-size="13" text-anchor="middle">${esc(spec.xLabel)}</text>`
  );
  parts.push(
    `<text x="22" y="${(y0 + y1) / 2}" font-size="13" text-anchor="middle" transform="rotate(-90 22 ${(y0 + y1) / 2})">${esc(spec.yLabel)}${yLog ? " (log)" : ""}</text>`
  );

  drawable.forEach((curve, k) => {
    const color = PALETTE[k % PALETTE.length];
    const coords = curve.points.map((p) => `${xScale(p.x).toFixed(2)},${yScale(p.y).toFixed(2)}`);
    parts.push(
      `<polyline class="curve" fill="none" stroke="${color}" stroke-width="1.8" points="${coords.join(" ")}"/>`
    );
    if (spec.paramDots) {
      for (const p of curve.points) {
        parts.push(
          `<circle class="param-dot" cx="${xScale(p.x).toFixed(2)}" cy="${yScale(p.y).toFixed(2)}" r="2.6" fill="${color}"/>`
        );
      }
    }
    const ly = MARGIN.top + 16 + 18 * k;
    parts.push(
      `<line x1="${x1 + 12}" y1="${ly - 4}" x2="${x1 + 34}" y2="${ly - 4}" stroke="${color}" stroke-width="2"/>`
    );
    parts.push(`<text x="${x1 + 40}" y="${ly}" font-size="12">${esc(curve.label)}</text>`);
  });

  parts.push("</svg>");
  return parts.join("\n") + "\n";
}
