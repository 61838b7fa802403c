/** Isometric 3D bar chart of the real part of a two-mode density matrix.
 *
 * Input: JSON {dims: [d1, d2], re: [...], im: [...]} with row-major flat
 * entries over the product basis |n1 n2>.  Only basis states with photon
 * numbers up to ``maxLevel`` per mode are drawn, and the largest imaginary
 * part is reported in an annotation since it is not displayed.
 */

import { Svg } from "./svg.js";

export interface DensityOptions {
  dpi?: number;
  maxLevel?: number;
}

export interface StateJson {
  dims: number[];
  re: number[];
  im: number[];
}

const W = 640;
const H = 560;

export function renderDensityMatrix(jsonText: string, opts: DensityOptions = {}): string {
  if (jsonText.trim().length === 0) {
    throw new Error("empty density-matrix input");
  }
  const data = JSON.parse(jsonText) as StateJson;
  if (!Array.isArray(data.dims) || data.dims.length !== 2
      || !Array.isArray(data.re) || !Array.isArray(data.im)) {
    throw new Error("schema mismatch: expected {dims: [d1, d2], re: [...], im: [...]}");
  }
  const [d1, d2] = data.dims;
  const dim = d1 * d2;
  if (data.re.length !== dim * dim || data.im.length !== dim * dim) {
    throw new Error(
      `schema mismatch: expected ${dim * dim} entries, got ${data.re.length}`,
    );
  }

  const nmax = Math.min(opts.maxLevel ?? 3, d1 - 1, d2 - 1);
  const labels: Array<[number, number]> = [];
  for (let n1 = 0; n1 <= nmax; n1++) {
    for (let n2 = 0; n2 <= nmax; n2++) {
      labels.push([n1, n2]);
    }
  }
  const nb = labels.length;
  const flat = (n1: number, n2: number) => n1 * d2 + n2;
  const re = (r: number, c: number) => data.re[r * dim + c];
  const im = (r: number, c: number) => data.im[r * dim + c];

  let maxAbs = 0;
  let maxIm = 0;
  for (const [r1, r2] of labels) {
    for (const [c1, c2] of labels) {
      maxAbs = Math.max(maxAbs, Math.abs(re(flat(r1, r2), flat(c1, c2))));
      maxIm = Math.max(maxIm, Math.abs(im(flat(r1, r2), flat(c1, c2))));
    }
  }
  if (maxAbs === 0) maxAbs = 1;

  // isometric projection: u along rows, v along columns, z upward
  const ux = 16;
  const uy = 8.5;
  const vx = -16;
  const vy = 8.5;
  const zscale = 180 / maxAbs;
  const ox = W / 2;
  const oy = 120;
  const proj = (i: number, j: number, z: number): [number, number] => [
    ox + i * ux + j * vx,
    oy + i * uy + j * vy - z * zscale,
  ];

  const svg = new Svg(W, H, opts.dpi ?? 96);
  // painter's order: draw back cells (small i+j) first
  const order: Array<[number, number]> = [];
  for (let r = 0; r < nb; r++) {
    for (let c = 0; c < nb; c++) {
      order.push([r, c]);
    }
  }
  order.sort((a, b) => a[0] + a[1] - (b[0] + b[1]));

  for (const [r, c] of order) {
    const [r1, r2] = labels[r];
    const [c1, c2] = labels[c];
    const z = re(flat(r1, r2), flat(c1, c2));
    drawBar(svg, proj, r, c, z, z >= 0 ? "#4d8fd1" : "#d1754d");
  }

  // axis labels along the two base edges
  for (let r = 0; r < nb; r++) {
    const [x, y] = proj(r + 0.4, -0.9, 0);
    svg.text(x, y, ketLabel(labels[r]), 9, "middle");
  }
  for (let c = 0; c < nb; c++) {
    const [x, y] = proj(-0.9, c + 0.4, 0);
    svg.text(x, y, ketLabel(labels[c]), 9, "middle");
  }
  svg.text(W / 2, H - 36, `real part, bar scale max |Re| = ${maxAbs.toPrecision(3)}`, 11);
  svg.text(W / 2, H - 18,
           `imaginary parts not shown: max |Im| = ${maxIm.toPrecision(3)}`, 11);
  return svg.render();
}

function drawBar(
  svg: Svg,
  proj: (i: number, j: number, z: number) => [number, number],
  r: number,
  c: number,
  z: number,
  color: string,
): void {
  const s = 0.78; // bar footprint within the cell
  const base = [
    proj(r, c, 0),
    proj(r + s, c, 0),
    proj(r + s, c + s, 0),
    proj(r, c + s, 0),
  ];
  if (Math.abs(z) < 1e-12) {
    svg.polygon(base, "#eeeeee", "#bbb");
    return;
  }
  const top = [
    proj(r, c, z),
    proj(r + s, c, z),
    proj(r + s, c + s, z),
    proj(r, c + s, z),
  ];
  // two visible side faces plus the top
  svg.polygon([base[1], base[2], top[2], top[1]], shade(color, 0.75));
  svg.polygon([base[2], base[3], top[3], top[2]], shade(color, 0.6));
  svg.polygon(top, color);
}

function shade(hex: string, k: number): string {
  const m = /#(..)(..)(..)/.exec(hex);
  if (!m) return hex;
  const [r, g, b] = [m[1], m[2], m[3]].map((h) => Math.round(parseInt(h, 16) * k));
  return `rgb(${r},${g},${b})`;
}

function ketLabel([n1, n2]: [number, number]): string {
  return `${n1}${n2}`;
}
