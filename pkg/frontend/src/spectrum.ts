/** Stacked line plot of single-mode occupation sweeps.
 *
 * Input schema: columns delta_mhz, rabi_mhz, duration_ns, nbar.  Rows are
 * grouped into one curve per (rabi_mhz, duration_ns) pair; curves are
 * vertically offset for readability and red guide lines mark the drive
 * frequency offsets at +-rabi for each curve.
 */

import { numericColumn, parseCsv, requireColumns } from "./csv.js";
import { Svg, ticks } from "./svg.js";

export interface SpectrumOptions {
  dpi?: number;
  offset?: number;
}

const W = 560;
const H = 480;
const M = { left: 62, right: 18, top: 24, bottom: 46 };

export function renderSpectrum(csvText: string, opts: SpectrumOptions = {}): string {
  const table = parseCsv(csvText);
  requireColumns(table, ["delta_mhz", "rabi_mhz", "duration_ns", "nbar"]);
  const delta = numericColumn(table, "delta_mhz");
  const rabi = numericColumn(table, "rabi_mhz");
  const dur = numericColumn(table, "duration_ns");
  const nbar = numericColumn(table, "nbar");

  const groups = new Map<string, number[]>();
  for (let i = 0; i < delta.length; i++) {
    const key = `${rabi[i]}|${dur[i]}`;
    if (!groups.has(key)) groups.set(key, []);
    groups.get(key)!.push(i);
  }
  const keys = [...groups.keys()].sort((a, b) => {
    const [ra, da] = a.split("|").map(Number);
    const [rb, db] = b.split("|").map(Number);
    return ra - rb || da - db;
  });

  const offset = opts.offset ?? 0.6;
  const xlo = Math.min(...delta);
  const xhi = Math.max(...delta);
  let yhi = 0;
  keys.forEach((key, k) => {
    for (const i of groups.get(key)!) {
      yhi = Math.max(yhi, nbar[i] + k * offset);
    }
  });
  yhi *= 1.05;

  const svg = new Svg(W, H, opts.dpi ?? 96);
  const px = (x: number) => M.left + ((x - xlo) / (xhi - xlo)) * (W - M.left - M.right);
  const py = (y: number) => H - M.bottom - (y / yhi) * (H - M.top - M.bottom);

  for (const t of ticks(xlo, xhi, 8)) {
    svg.line(px(t), H - M.bottom, px(t), H - M.bottom + 4, "#333");
    svg.text(px(t), H - M.bottom + 16, String(t));
  }
  for (const t of ticks(0, yhi, 6)) {
    svg.line(M.left - 4, py(t), M.left, py(t), "#333");
    svg.text(M.left - 8, py(t) + 4, String(t), 11, "end");
  }
  svg.line(M.left, H - M.bottom, W - M.right, H - M.bottom, "#333");
  svg.line(M.left, M.top, M.left, H - M.bottom, "#333");
  svg.text((M.left + W - M.right) / 2, H - 10, "detuning (MHz)");
  svg.text(16, (M.top + H - M.bottom) / 2, "mode occupation (offset)", 11, "middle", -90);

  const palette = ["#1f77b4", "#2ca02c", "#9467bd", "#d62728", "#8c564b",
                   "#e377c2", "#17becf", "#bcbd22"];
  keys.forEach((key, k) => {
    const idx = groups.get(key)!;
    idx.sort((a, b) => delta[a] - delta[b]);
    const [r, d] = key.split("|").map(Number);
    const pts: Array<[number, number]> = idx.map((i) => [
      px(delta[i]),
      py(nbar[i] + k * offset),
    ]);
    svg.polyline(pts, palette[k % palette.length]);
    // red guides at the sideband positions of this curve
    for (const g of [-r, r]) {
      if (g >= xlo && g <= xhi) {
        const base = py(k * offset);
        svg.line(px(g), base - 26, px(g), base + 6, "#d62728", 0.8, "3,2");
      }
    }
    svg.text(W - M.right - 4, py(k * offset) - 6,
             `Ω/2π=${r} MHz, T=${d} ns`, 9, "end");
  });
  return svg.render();
}
