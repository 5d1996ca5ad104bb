/**
 * The three figure archetypes built from simulation CSV artifacts:
 * coherence curves with the fragmentation threshold, a Husimi heatmap with
 * half-maximum contours from earlier snapshots, and a density carpet with
 * trajectory overlays.  Rendering is a pure function of the input files.
 */

import { createHash } from "node:crypto";
import { readFileSync } from "node:fs";
import path from "node:path";

import { colormap, quantize } from "./colormap.js";
import { contourSegments } from "./contour.js";
import { Grid2D, Table, column, gridFromTable, parseCsv } from "./csv.js";
import { listKey, numberKey, parseKeyValue, requireKey } from "./keyvalue.js";
import { DEFAULT_FRAME, Frame, axes, document as svgDocument, fmt, line,
         linearScale, polyline, text, trimNumber } from "./svg.js";

export interface FigureSpec {
  figure: string;
  out: string;
  title: string;
  captionHash: string;
  kv: Map<string, string>;
  baseDir: string;
}

export function loadSpec(specPath: string): FigureSpec {
  const kv = parseKeyValue(readFileSync(specPath, "utf-8"));
  const figure = requireKey(kv, "figure");
  const out = requireKey(kv, "out");
  const baseDir = path.dirname(path.resolve(specPath));
  let captionHash = "";
  const manifest = kv.get("manifest");
  if (manifest) {
    const body = readFileSync(path.resolve(baseDir, manifest));
    captionHash = createHash("sha256").update(body).digest("hex").slice(0, 12);
  }
  return { figure, out, title: kv.get("title") ?? figure, captionHash, kv, baseDir };
}

function loadTable(spec: FigureSpec, key: string): { table: Table; path: string } {
  const rel = requireKey(spec.kv, key);
  const full = path.resolve(spec.baseDir, rel);
  return { table: parseCsv(readFileSync(full, "utf-8"), rel), path: rel };
}

function caption(spec: FigureSpec, frame: Frame): string {
  let s = text(frame.left, 16, spec.title, 13, "start", "#111");
  if (spec.captionHash) {
    s += text(frame.width - frame.right, 16, `run ${spec.captionHash}`, 9, "end", "#999");
  }
  return s;
}

/** Axis range from the spec when given, otherwise the data extent. */
function range(spec: FigureSpec, loKey: string, hiKey: string,
               dataLo: number, dataHi: number): [number, number] {
  return [numberKey(spec.kv, loKey, dataLo), numberKey(spec.kv, hiKey, dataHi)];
}

// --- archetype 1: coherence curves --------------------------------------------

export function renderLambdaCurves(spec: FigureSpec): string {
  const { table, path: csvPath } = loadTable(spec, "observables");
  const t = column(table, "t", csvPath);
  const lamP = column(table, "lambda_plus", csvPath);
  const lamM = column(table, "lambda_minus", csvPath);
  const threshold = numberKey(spec.kv, "threshold", 0.2);

  const frame = DEFAULT_FRAME;
  const [tLo, tHi] = range(spec, "x_min", "x_max", t[0], t[t.length - 1]);
  const [yLo, yHi] = range(spec, "y_min", "y_max", 0, 1.02);
  const xS = linearScale(tLo, tHi, frame.left, frame.width - frame.right);
  const yS = linearScale(yLo, yHi, frame.height - frame.bottom, frame.top);

  let body = caption(spec, frame);
  body += axes(frame, xS, yS, "t", "orbital occupation");
  const pts = (col: Float64Array): Array<[number, number]> =>
    Array.from(t, (v, i) => [xS(v), yS(col[i])] as [number, number]);
  body += polyline(pts(lamP), "#1f77b4", 1.6);
  body += polyline(pts(lamM), "#d62728", 1.6);
  const gap = Float64Array.from(t, (_, i) => lamP[i] - lamM[i]);
  body += polyline(pts(gap), "#555555", 1.0, "5,3");
  body += line(xS(t[0]), yS(threshold), xS(t[t.length - 1]), yS(threshold), "#2ca02c", 1.0, "2,3");
  body += text(xS(t[t.length - 1]) - 4, yS(threshold) - 4,
               `threshold ${trimNumber(threshold)}`, 9, "end", "#2ca02c");
  body += legend(frame, [["#1f77b4", "lambda_plus"], ["#d62728", "lambda_minus"],
                         ["#555555", "difference"]]);
  return svgDocument(frame, body);
}

function legend(frame: Frame, entries: Array<[string, string]>): string {
  let s = "";
  let y = frame.top + 10;
  const x = frame.width - frame.right - 150;
  for (const [color, label] of entries) {
    s += line(x, y, x + 16, y, color, 1.6);
    s += text(x + 20, y + 3.5, label, 9, "start", "#444");
    y += 13;
  }
  return s;
}

// --- archetype 2: Husimi heatmap with contours ---------------------------------

function heatmapCells(grid: Grid2D, xS: (v: number) => number, yS: (v: number) => number,
                      normalize: (v: number) => number): string {
  // row-run-length encoding over quantized colors keeps the SVG compact
  const levels = 32;
  const n = grid.n;
  const cellW = Math.abs(xS(grid.re[1]) - xS(grid.re[0]));
  const cellH = Math.abs(yS(grid.im[1]) - yS(grid.im[0]));
  let s = "";
  for (let i = 0; i < n; i++) {
    let j = 0;
    while (j < n) {
      const q = quantize(normalize(grid.values[i * n + j]), levels);
      let k = j + 1;
      while (k < n && quantize(normalize(grid.values[i * n + k]), levels) === q) k++;
      if (q > 0) {
        const x = xS(grid.re[j]) - cellW / 2;
        const y = yS(grid.im[i]) - cellH / 2;
        const w = cellW * (k - j);
        s += `<rect x="${fmt(x)}" y="${fmt(y)}" width="${fmt(w)}" height="${fmt(cellH)}" ` +
          `fill="${colormap(q / (levels - 1))}"/>\n`;
      }
      j = k;
    }
  }
  return s;
}

export function renderHusimi(spec: FigureSpec): string {
  const files = listKey(spec.kv, "q_files");
  if (files.length === 0) throw new Error("q_files must list at least one Husimi CSV");
  const level = numberKey(spec.kv, "contour_level", 0.5);
  const grids = files.map((rel) => {
    const full = path.resolve(spec.baseDir, rel);
    const table = parseCsv(readFileSync(full, "utf-8"), rel);
    return { rel, grid: gridFromTable(table, "re_alpha", "im_alpha", "q", rel) };
  });

  const main = grids[grids.length - 1].grid;
  const frame: Frame = { ...DEFAULT_FRAME, width: 560, height: 560, right: 28, top: 44 };
  const xS = linearScale(main.re[0], main.re[main.n - 1], frame.left, frame.width - frame.right);
  const yS = linearScale(main.im[0], main.im[main.n - 1], frame.height - frame.bottom, frame.top);

  // stored Q is |<alpha|psi>|^2; display its square root like the
  // phase-space pictures the pipeline mirrors
  let qMax = 0;
  for (const v of main.values) qMax = Math.max(qMax, v);
  if (qMax <= 0) throw new Error("Husimi grid has no weight");
  const normalize = (v: number) => Math.sqrt(Math.max(v, 0) / qMax);

  let body = caption(spec, frame);
  body += heatmapCells(main, xS, yS, normalize);
  body += axes(frame, xS, yS, "Re alpha", "Im alpha");

  // magenta half-maximum contours of every earlier snapshot
  for (const { rel, grid } of grids.slice(0, -1)) {
    let gMax = 0;
    for (const v of grid.values) gMax = Math.max(gMax, v);
    if (gMax <= 0) throw new Error(`${rel}: Husimi grid has no weight`);
    const segs = contourSegments(grid.re, grid.im, grid.values, level * gMax);
    let d = "";
    for (const [x1, y1, x2, y2] of segs) {
      d += `M${fmt(xS(x1))} ${fmt(yS(y1))}L${fmt(xS(x2))} ${fmt(yS(y2))}`;
    }
    body += `<path fill="none" stroke="#e31fc4" stroke-width="1.1" d="${d}"/>\n`;
  }
  // main-grid contour at the same relative level, in white for contrast
  const segsMain = contourSegments(main.re, main.im, main.values, level * qMax);
  let dMain = "";
  for (const [x1, y1, x2, y2] of segsMain) {
    dMain += `M${fmt(xS(x1))} ${fmt(yS(y1))}L${fmt(xS(x2))} ${fmt(yS(y2))}`;
  }
  body += `<path fill="none" stroke="#ffffff" stroke-width="0.8" d="${dMain}"/>\n`;
  return svgDocument(frame, body);
}

// --- archetype 3: density carpet with trajectory overlay -------------------------

export function renderDensityCarpet(spec: FigureSpec): string {
  const { table: fieldTable, path: fieldPath } = loadTable(spec, "field");
  const t = column(fieldTable, "t", fieldPath);
  const x = column(fieldTable, "x", fieldPath);
  const density = column(fieldTable, "density", fieldPath);

  // frames share the same x axis; recover the frame structure
  const nX = (() => {
    let count = 1;
    while (count < t.length && t[count] === t[0]) count++;
    return count;
  })();
  if (t.length % nX !== 0) throw new Error(`${fieldPath}: rows do not factor into frames`);
  const nT = t.length / nX;
  if (nT < 2) throw new Error(`${fieldPath}: need at least two frames for a carpet`);

  const frame = { ...DEFAULT_FRAME, height: 440 };
  const [tLo, tHi] = range(spec, "x_min", "x_max", t[0], t[t.length - 1]);
  const [xLo, xHi] = range(spec, "y_min", "y_max", x[0], x[nX - 1]);
  const xS = linearScale(tLo, tHi, frame.left, frame.width - frame.right);
  const yS = linearScale(xLo, xHi, frame.height - frame.bottom, frame.top);

  let dMax = 0;
  for (const v of density) dMax = Math.max(dMax, v);
  if (dMax <= 0) throw new Error(`${fieldPath}: density carpet has no weight`);

  const levels = 32;
  const colW = (frame.width - frame.left - frame.right) / nT;
  const rowH = Math.abs(yS(x[1]) - yS(x[0]));
  let body = caption(spec, frame);
  for (let k = 0; k < nT; k++) {
    const xLeft = xS(t[k * nX]) - colW / 2;
    let i = 0;
    while (i < nX) {
      const q = quantize(density[k * nX + i] / dMax, levels);
      let j = i + 1;
      while (j < nX && quantize(density[k * nX + j] / dMax, levels) === q) j++;
      if (q > 0) {
        const yTop = yS(x[j - 1]) - rowH / 2;
        const h = rowH * (j - i);
        body += `<rect x="${fmt(xLeft)}" y="${fmt(yTop)}" width="${fmt(colW + 0.25)}" ` +
          `height="${fmt(h)}" fill="${colormap(q / (levels - 1))}"/>\n`;
      }
      i = j;
    }
  }
  body += axes(frame, xS, yS, "t", "x");

  const { table: trajTable, path: trajPath } = loadTable(spec, "trajectory");
  const tt = column(trajTable, "t", trajPath);
  const resolved = column(trajTable, "resolved", trajPath);
  for (const name of ["x_left", "x_right"]) {
    const series = column(trajTable, name, trajPath);
    const pts: Array<[number, number]> = [];
    for (let i = 0; i < trajTable.rows; i++) {
      if (resolved[i] > 0) pts.push([xS(tt[i]), yS(series[i])]);
    }
    body += polyline(pts, "#18c5c0", 1.4);
  }
  if (spec.kv.has("ode_trajectory")) {
    const { table: odeTable, path: odePath } = loadTable(spec, "ode_trajectory");
    const ot = column(odeTable, "t", odePath);
    for (const name of ["x_left", "x_right"]) {
      const series = column(odeTable, name, odePath);
      const pts: Array<[number, number]> = [];
      for (let i = 0; i < odeTable.rows; i += 8) pts.push([xS(ot[i]), yS(series[i])]);
      body += polyline(pts, "#ffffff", 0.9, "4,3");
    }
  }
  return svgDocument(frame, body);
}

// --- dispatch ---------------------------------------------------------------------

const COMMON_KEYS = ["figure", "out", "title", "manifest", "x_min", "x_max", "y_min", "y_max"];
const FIGURE_KEYS: Record<string, string[]> = {
  "lambda-curves": ["observables", "threshold"],
  "husimi": ["q_files", "contour_level"],
  "density-carpet": ["field", "trajectory", "ode_trajectory"],
};

function checkKeys(spec: FigureSpec): void {
  const allowed = new Set([...COMMON_KEYS, ...(FIGURE_KEYS[spec.figure] ?? [])]);
  const unknown = [...spec.kv.keys()].filter((k) => !allowed.has(k)).sort();
  if (unknown.length > 0) {
    throw new Error(`unknown figure-spec keys: ${unknown.join(", ")}`);
  }
}

export function renderSpec(spec: FigureSpec): string {
  if (!(spec.figure in FIGURE_KEYS)) {
    throw new Error(`unknown figure type ${JSON.stringify(spec.figure)}; ` +
      `valid: ${Object.keys(FIGURE_KEYS).join(", ")}`);
  }
  checkKeys(spec);
  switch (spec.figure) {
    case "lambda-curves":
      return renderLambdaCurves(spec);
    case "husimi":
      return renderHusimi(spec);
    default:
      return renderDensityCarpet(spec);
  }
}
