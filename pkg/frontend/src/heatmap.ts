/** Heatmap of a gridded quantity over two detuning axes.
 *
 * Input schema: the first two columns are the axes (MHz), the value column
 * is either named via options or defaults to the third column.  Cells whose
 * value is NaN (for example reconstruction failures) render white.  A
 * diverging colormap centered at zero is used when the data changes sign.
 */

import { numericColumn, parseCsv } from "./csv.js";
import { diverging, sequential, Svg, ticks } from "./svg.js";

export interface HeatmapOptions {
  dpi?: number;
  valueColumn?: string;
  title?: string;
}

const W = 560;
const H = 500;
const M = { left: 64, right: 96, top: 30, bottom: 50 };

export function renderHeatmap(csvText: string, opts: HeatmapOptions = {}): string {
  const table = parseCsv(csvText);
  if (table.header.length < 3) {
    throw new Error("heatmap input needs at least two axis columns and one value column");
  }
  const [xname, yname] = table.header;
  const vname = opts.valueColumn ?? table.header[2];
  const xs = numericColumn(table, xname);
  const ys = numericColumn(table, yname);
  const vs = numericColumn(table, vname);

  const xu = uniqueSorted(xs);
  const yu = uniqueSorted(ys);
  const grid = new Map<string, number>();
  for (let i = 0; i < vs.length; i++) {
    grid.set(`${xs[i]}|${ys[i]}`, vs[i]);
  }

  const finite = vs.filter(Number.isFinite);
  if (finite.length === 0) {
    throw new Error("heatmap input has no finite values");
  }
  let lo = Math.min(...finite);
  let hi = Math.max(...finite);
  const signed = lo < 0 && hi > 0;
  if (signed) {
    const a = Math.max(-lo, hi);
    lo = -a;
    hi = a;
  }
  if (hi === lo) hi = lo + 1;

  const color = (v: number) =>
    signed ? diverging((2 * (v - lo)) / (hi - lo) - 1) : sequential((v - lo) / (hi - lo));

  const svg = new Svg(W, H, opts.dpi ?? 96);
  const plotW = W - M.left - M.right;
  const plotH = H - M.top - M.bottom;
  const cw = plotW / xu.length;
  const ch = plotH / yu.length;
  const px = (i: number) => M.left + i * cw;
  const py = (j: number) => H - M.bottom - (j + 1) * ch;

  xu.forEach((x, i) => {
    yu.forEach((y, j) => {
      const v = grid.get(`${x}|${y}`);
      const fill = v === undefined || !Number.isFinite(v) ? "white" : color(v);
      svg.rect(px(i), py(j), cw + 0.4, ch + 0.4, fill);
    });
  });
  svg.rect(M.left, M.top, plotW, plotH, "none", "#333");

  for (const t of ticks(xu[0], xu[xu.length - 1], 6)) {
    const i = nearestIndex(xu, t);
    svg.text(px(i) + cw / 2, H - M.bottom + 16, String(t));
  }
  for (const t of ticks(yu[0], yu[yu.length - 1], 6)) {
    const j = nearestIndex(yu, t);
    svg.text(M.left - 8, py(j) + ch / 2 + 4, String(t), 11, "end");
  }
  svg.text((M.left + W - M.right) / 2, H - 12, `${xname}`);
  svg.text(16, (M.top + H - M.bottom) / 2, `${yname}`, 11, "middle", -90);
  if (opts.title) svg.text((M.left + W - M.right) / 2, 18, opts.title, 12);

  // colorbar
  const barX = W - M.right + 24;
  const steps = 64;
  for (let k = 0; k < steps; k++) {
    const v = lo + ((hi - lo) * k) / (steps - 1);
    const y = H - M.bottom - ((k + 1) / steps) * plotH;
    svg.rect(barX, y, 16, plotH / steps + 0.4, color(v));
  }
  svg.rect(barX, M.top, 16, plotH, "none", "#333");
  for (const t of ticks(lo, hi, 5)) {
    const y = H - M.bottom - ((t - lo) / (hi - lo)) * plotH;
    svg.text(barX + 22, y + 4, formatShort(t), 10, "start");
  }
  svg.text(barX + 8, M.top - 8, vname, 10);
  return svg.render();
}

function uniqueSorted(xs: number[]): number[] {
  return [...new Set(xs)].sort((a, b) => a - b);
}

function nearestIndex(sorted: number[], v: number): number {
  let best = 0;
  for (let i = 1; i < sorted.length; i++) {
    if (Math.abs(sorted[i] - v) < Math.abs(sorted[best] - v)) best = i;
  }
  return best;
}

function formatShort(v: number): string {
  if (v === 0) return "0";
  const a = Math.abs(v);
  if (a >= 0.01 && a < 1000) return Number(v.toPrecision(3)).toString();
  return v.toExponential(1);
}
