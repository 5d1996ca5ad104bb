/** Small deterministic SVG builders: fixed decimal formatting throughout. */

export function fmt(v: number): string {
  if (!Number.isFinite(v)) throw new Error(`cannot place non-finite coordinate ${v}`);
  const s = v.toFixed(2);
  return s === "-0.00" ? "0.00" : s;
}

export function esc(s: string): string {
  return s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

export interface Scale {
  (v: number): number;
  domain: [number, number];
}

export function linearScale(d0: number, d1: number, r0: number, r1: number): Scale {
  const span = d1 - d0 || 1;
  const fn = ((v: number) => r0 + ((v - d0) / span) * (r1 - r0)) as Scale;
  fn.domain = [d0, d1];
  return fn;
}

export function niceTicks(min: number, max: number, count: number): number[] {
  const range = max - min || 1;
  const rough = range / count;
  const mag = Math.pow(10, Math.floor(Math.log10(rough)));
  const step = [1, 2, 5, 10].map((m) => m * mag).find((s) => s >= rough) ?? rough;
  const ticks: number[] = [];
  for (let v = Math.ceil(min / step) * step; v <= max + step * 1e-9; v += step) {
    ticks.push(Math.abs(v) < step * 1e-9 ? 0 : v);
  }
  return ticks;
}

export function polyline(points: Array<[number, number]>, stroke: string, width: number,
                         dash?: string): string {
  const pts = points.map(([x, y]) => `${fmt(x)},${fmt(y)}`).join(" ");
  const dashAttr = dash ? ` stroke-dasharray="${dash}"` : "";
  return `<polyline fill="none" stroke="${stroke}" stroke-width="${width}"${dashAttr} points="${pts}"/>\n`;
}

export function text(x: number, y: number, content: string, size: number,
                     anchor = "start", fill = "#333", extra = ""): string {
  return `<text x="${fmt(x)}" y="${fmt(y)}" font-size="${size}" text-anchor="${anchor}" ` +
    `fill="${fill}"${extra}>${esc(content)}</text>\n`;
}

export function line(x1: number, y1: number, x2: number, y2: number, stroke: string,
                     width: number, dash?: string): string {
  const dashAttr = dash ? ` stroke-dasharray="${dash}"` : "";
  return `<line x1="${fmt(x1)}" y1="${fmt(y1)}" x2="${fmt(x2)}" y2="${fmt(y2)}" ` +
    `stroke="${stroke}" stroke-width="${width}"${dashAttr}/>\n`;
}

export interface Frame {
  width: number;
  height: number;
  left: number;
  right: number;
  top: number;
  bottom: number;
}

export const DEFAULT_FRAME: Frame = { width: 720, height: 400, left: 64, right: 24, top: 40, bottom: 52 };

export function axes(frame: Frame, xScale: Scale, yScale: Scale, xLabel: string,
                     yLabel: string): string {
  const { left, right, top, bottom, width, height } = frame;
  const x0 = left, x1 = width - right, y0 = height - bottom, y1 = top;
  let s = "";
  for (const v of niceTicks(xScale.domain[0], xScale.domain[1], 7)) {
    const x = xScale(v);
    s += line(x, y0, x, y0 + 4, "#333", 0.6);
    s += text(x, y0 + 16, trimNumber(v), 10, "middle", "#555");
  }
  for (const v of niceTicks(yScale.domain[0], yScale.domain[1], 6)) {
    const y = yScale(v);
    s += line(x0 - 4, y, x0, y, "#333", 0.6);
    s += text(x0 - 7, y + 3.5, trimNumber(v), 10, "end", "#555");
    s += line(x0, y, x1, y, "#eee", 0.5);
  }
  s += line(x0, y0, x1, y0, "#333", 1);
  s += line(x0, y0, x0, y1, "#333", 1);
  s += text((x0 + x1) / 2, height - 10, xLabel, 11, "middle");
  s += text(14, (y0 + y1) / 2, yLabel, 11, "middle", "#333",
            ` transform="rotate(-90,14,${fmt((y0 + y1) / 2)})"`);
  return s;
}

export function trimNumber(v: number): string {
  if (v === 0) return "0";
  const abs = Math.abs(v);
  if (abs >= 1e4 || abs < 1e-3) return v.toExponential(1);
  return parseFloat(v.toPrecision(6)).toString();
}

export function document(frame: Frame, body: string): string {
  return `<svg xmlns="http://www.w3.org/2000/svg" width="${frame.width}" height="${frame.height}" ` +
    `viewBox="0 0 ${frame.width} ${frame.height}" font-family="Helvetica, Arial, sans-serif">\n` +
    `<rect width="${frame.width}" height="${frame.height}" fill="#ffffff"/>\n` + body + `</svg>\n`;
}
