/**
 * Deterministic SVG panels over parsed pipeline CSVs.
 *
 * Every number drawn here is read from the file; in particular the width
 * panel's fit line comes from the scaling CSV's fit row and is never
 * refitted. Fixed canvas, styles, and number formatting keep the output
 * byte-identical across reruns.
 */

import { parseAs, Row, SchemaError } from "./csv.js";

export type Panel = "signal" | "width" | "windows" | "coupling";

const W = 640;
const H = 420;
const MARGIN = { left: 62, right: 16, top: 34, bottom: 46 };
const PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

const fmt = (v: number): string => Number(v.toPrecision(6)).toString();

interface Scale {
  (v: number): number;
  lo: number;
  hi: number;
}

function scale(lo: number, hi: number, outLo: number, outHi: number): Scale {
  const span = hi - lo || 1;
  const f = ((v: number) => outLo + ((v - lo) / span) * (outHi - outLo)) as Scale;
  f.lo = lo;
  f.hi = hi;
  return f;
}

/** 1/2/5-stepped ticks covering [lo, hi]; deterministic for fixed inputs. */
function ticks(lo: number, hi: number, target = 5): number[] {
  const span = hi - lo || 1;
  const raw = span / target;
  const mag = Math.pow(10, Math.floor(Math.log10(raw)));
  const step = [1, 2, 5, 10].map((m) => m * mag).find((s) => span / s <= target + 1) ?? 10 * mag;
  const out: number[] = [];
  for (let v = Math.ceil(lo / step) * step; v <= hi + 1e-12 * span; v += step) {
    out.push(Math.abs(v) < 1e-12 * span ? 0 : v);
  }
  return out;
}

function extent(values: number[]): [number, number] {
  let lo = Infinity;
  let hi = -Infinity;
  for (const v of values) {
    if (!Number.isFinite(v)) continue;
    if (v < lo) lo = v;
    if (v > hi) hi = v;
  }
  if (lo > hi) throw new SchemaError("no finite values to plot");
  if (lo === hi) {
    lo -= 0.5;
    hi += 0.5;
  }
  return [lo, hi];
}

function pad([lo, hi]: [number, number], frac = 0.05): [number, number] {
  const p = (hi - lo) * frac;
  return [lo - p, hi + p];
}

class Svg {
  private parts: string[] = [];

  constructor(title: string) {
    this.parts.push(
      `<svg xmlns="http://www.w3.org/2000/svg" width="${W}" height="${H}" viewBox="0 0 ${W} ${H}" font-family="Helvetica, Arial, sans-serif">`,
      `<rect width="${W}" height="${H}" fill="white"/>`,
      `<text x="${W / 2}" y="20" font-size="14" text-anchor="middle">${title}</text>`,
    );
  }

  axes(x: Scale, y: Scale, xLabel: string, yLabel: string): void {
    const x0 = MARGIN.left;
    const x1 = W - MARGIN.right;
    const y0 = H - MARGIN.bottom;
    const y1 = MARGIN.top;
    this.parts.push(`<g stroke="#333" fill="none"><path d="M${x0} ${y1}V${y0}H${x1}"/></g>`);
    for (const t of ticks(x.lo, x.hi)) {
      const px = fmt(x(t));
      this.parts.push(
        `<line x1="${px}" y1="${y0}" x2="${px}" y2="${y0 + 4}" stroke="#333"/>`,
        `<text x="${px}" y="${y0 + 16}" font-size="10" text-anchor="middle">${fmt(t)}</text>`,
      );
    }
    for (const t of ticks(y.lo, y.hi)) {
      const py = fmt(y(t));
      this.parts.push(
        `<line x1="${x0 - 4}" y1="${py}" x2="${x0}" y2="${py}" stroke="#333"/>`,
        `<text x="${x0 - 7}" y="${py}" font-size="10" text-anchor="end" dominant-baseline="middle">${fmt(t)}</text>`,
      );
    }
    this.parts.push(
      `<text x="${(x0 + x1) / 2}" y="${H - 8}" font-size="12" text-anchor="middle">${xLabel}</text>`,
      `<text x="14" y="${(y0 + y1) / 2}" font-size="12" text-anchor="middle" transform="rotate(-90 14 ${(y0 + y1) / 2})">${yLabel}</text>`,
    );
  }

  polyline(pts: Array<[number, number]>, stroke: string, dash = ""): void {
    const d = pts.map(([a, b]) => `${fmt(a)},${fmt(b)}`).join(" ");
    const dashAttr = dash ? ` stroke-dasharray="${dash}"` : "";
    this.parts.push(`<polyline points="${d}" fill="none" stroke="${stroke}" stroke-width="1.5"${dashAttr}/>`);
  }

  circle(cx: number, cy: number, fill: string, open = false): void {
    const style = open ? `fill="white" stroke="${fill}" stroke-width="1.5"` : `fill="${fill}"`;
    this.parts.push(`<circle cx="${fmt(cx)}" cy="${fmt(cy)}" r="3.5" ${style}/>`);
  }

  label(x: number, y: number, text: string, fill = "#333"): void {
    this.parts.push(`<text x="${fmt(x)}" y="${fmt(y)}" font-size="11" fill="${fill}">${text}</text>`);
  }

  toString(): string {
    return this.parts.join("\n") + "\n</svg>\n";
  }
}

function plotArea(): { px: [number, number]; py: [number, number] } {
  return {
    px: [MARGIN.left, W - MARGIN.right],
    py: [H - MARGIN.bottom, MARGIN.top], // flipped: SVG y grows downward
  };
}

function requireRows(rows: Row[]): void {
  if (rows.length === 0) throw new SchemaError("no data rows");
}

/** One median-signal line per dimension, x = ln tau, peak scale marked. */
function renderSignal(text: string): string {
  const rows = parseAs(text, "curves");
  requireRows(rows);
  const byD = new Map<number, Row[]>();
  for (const row of rows) {
    const d = row.d as number;
    if (!byD.has(d)) byD.set(d, []);
    byD.get(d)!.push(row);
  }
  const { px, py } = plotArea();
  const x = scale(...pad(extent(rows.map((r) => r.ln_tau as number))), ...px);
  const y = scale(...pad(extent(rows.map((r) => r.median_signal as number))), ...py);
  const svg = new Svg("shell proxy signal");
  svg.axes(x, y, "ln tau", "median signal");
  const lnStar = Math.log(rows[0].tau_star as number);
  svg.polyline(
    [
      [x(lnStar), py[0]],
      [x(lnStar), py[1]],
    ],
    "#999",
    "4 3",
  );
  let i = 0;
  for (const [d, group] of byD) {
    const color = PALETTE[i % PALETTE.length];
    svg.polyline(
      group.map((r) => [x(r.ln_tau as number), y(r.median_signal as number)]),
      color,
    );
    svg.label(W - MARGIN.right - 72, MARGIN.top + 14 + 14 * i, `d=${d}`, color);
    i += 1;
  }
  return svg.toString();
}

/** FWHM against 1/sqrt(d); the fit line is read from the file's fit row. */
function renderWidth(text: string): string {
  const rows = parseAs(text, "scaling");
  const points = rows.filter((r) => r.row_type === "point");
  requireRows(points);
  const fit = rows.find((r) => r.row_type === "fit");
  if (fit === undefined) throw new SchemaError("scaling file has no fit row");
  const xs = points.map((r) => r.inv_sqrt_d as number);
  const ys = points.map((r) => r.fwhm as number);
  const { px, py } = plotArea();
  const x = scale(...pad([0, Math.max(...xs)]), ...px);
  const slope = fit.slope as number;
  const intercept = fit.intercept as number;
  const lineY = [intercept + slope * x.lo, intercept + slope * x.hi];
  const y = scale(...pad(extent([...ys, ...lineY, 0])), ...py);
  const svg = new Svg("window width scaling");
  svg.axes(x, y, "1/sqrt(d)", "FWHM of ln-tau window");
  svg.polyline(
    [
      [px[0], y(lineY[0])],
      [px[1], y(lineY[1])],
    ],
    "#d62728",
  );
  for (let i = 0; i < xs.length; i++) svg.circle(x(xs[i]), y(ys[i]), "#1f77b4");
  svg.label(MARGIN.left + 8, MARGIN.top + 14, `fit: ${fmt(slope)} / sqrt(d) + ${fmt(intercept)}`);
  svg.label(MARGIN.left + 8, MARGIN.top + 28, `r^2 = ${fmt(fit.r_squared as number)}`);
  return svg.toString();
}

/** Rate window bracket [kappa-, kappa+] against tau, one pair per constant. */
function renderWindows(text: string): string {
  const rows = parseAs(text, "windows");
  requireRows(rows);
  const byC = new Map<number, Row[]>();
  for (const row of rows) {
    const c = row.c_constant as number;
    if (!byC.has(c)) byC.set(c, []);
    byC.get(c)!.push(row);
  }
  const { px, py } = plotArea();
  const x = scale(...pad(extent(rows.map((r) => Math.log(r.tau as number)))), ...px);
  const y = scale(
    ...pad(extent(rows.flatMap((r) => [r.kappa_minus as number, r.kappa_plus as number, 0]))),
    ...py,
  );
  const svg = new Svg("informative rate window");
  svg.axes(x, y, "ln tau", "rate ln(n)/d");
  svg.polyline(
    [
      [px[0], y(0)],
      [px[1], y(0)],
    ],
    "#999",
    "2 3",
  );
  let i = 0;
  for (const [c, group] of byC) {
    const color = PALETTE[i % PALETTE.length];
    svg.polyline(
      group.map((r) => [x(Math.log(r.tau as number)), y(r.kappa_minus as number)]),
      color,
    );
    svg.polyline(
      group.map((r) => [x(Math.log(r.tau as number)), y(r.kappa_plus as number)]),
      color,
      "5 3",
    );
    svg.label(MARGIN.left + 8, MARGIN.top + 14 + 14 * i, `C=${fmt(c)} (solid -, dashed +)`, color);
    i += 1;
  }
  return svg.toString();
}

/** Divergence step against codebook rate; runs that never diverge sit in a top band. */
function renderCoupling(text: string): string {
  const rows = parseAs(text, "coupling");
  requireRows(rows);
  const q = Math.max(...rows.map((r) => r.q as number));
  const infBand = q + 1;
  const { px, py } = plotArea();
  const x = scale(...pad(extent(rows.map((r) => r.rate as number))), ...px);
  const y = scale(...pad([1, infBand]), ...py);
  const svg = new Svg("coupled transcript divergence");
  svg.axes(x, y, "rate ln(n)/d", "first diverging query");
  svg.polyline(
    [
      [px[0], y(infBand)],
      [px[1], y(infBand)],
    ],
    "#999",
    "2 3",
  );
  svg.label(MARGIN.left + 8, y(infBand) - 5, "never diverged");
  let diverged = 0;
  for (const row of rows) {
    const t = row.t_or_inf as number;
    if (Number.isFinite(t)) {
      diverged += 1;
      svg.circle(x(row.rate as number), y(t), "#d62728");
    } else {
      svg.circle(x(row.rate as number), y(infBand), "#1f77b4", true);
    }
  }
  svg.label(MARGIN.left + 8, MARGIN.top + 14, `diverged ${diverged}/${rows.length}`);
  return svg.toString();
}

const PANELS: Record<Panel, (text: string) => string> = {
  signal: renderSignal,
  width: renderWidth,
  windows: renderWindows,
  coupling: renderCoupling,
};

export function render(panel: Panel, csvText: string): string {
  const f = PANELS[panel];
  if (f === undefined) throw new SchemaError(`unknown panel '${panel}'`);
  return f(csvText);
}
