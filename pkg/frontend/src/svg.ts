/** Hand-rolled SVG assembly: no DOM, deterministic output. */

export class Svg {
  private parts: string[] = [];

  constructor(
    public readonly width: number,
    public readonly height: number,
    public readonly dpi = 96,
  ) {}

  add(fragment: string): void {
    this.parts.push(fragment);
  }

  line(x1: number, y1: number, x2: number, y2: number, stroke: string, width = 1, dash = ""): void {
    const d = dash ? ` stroke-dasharray="${dash}"` : "";
    this.add(
      `<line x1="${f(x1)}" y1="${f(y1)}" x2="${f(x2)}" y2="${f(y2)}" stroke="${stroke}" stroke-width="${width}"${d}/>`,
    );
  }

  polyline(points: Array<[number, number]>, stroke: string, width = 1.2): void {
    const pts = points.map(([x, y]) => `${f(x)},${f(y)}`).join(" ");
    this.add(`<polyline points="${pts}" fill="none" stroke="${stroke}" stroke-width="${width}"/>`);
  }

  rect(x: number, y: number, w: number, h: number, fill: string, stroke = "none"): void {
    this.add(
      `<rect x="${f(x)}" y="${f(y)}" width="${f(w)}" height="${f(h)}" fill="${fill}" stroke="${stroke}"/>`,
    );
  }

  polygon(points: Array<[number, number]>, fill: string, stroke = "#333", width = 0.4): void {
    const pts = points.map(([x, y]) => `${f(x)},${f(y)}`).join(" ");
    this.add(`<polygon points="${pts}" fill="${fill}" stroke="${stroke}" stroke-width="${width}"/>`);
  }

  text(x: number, y: number, content: string, size = 11, anchor = "middle", rotate = 0): void {
    const tr = rotate ? ` transform="rotate(${rotate} ${f(x)} ${f(y)})"` : "";
    this.add(
      `<text x="${f(x)}" y="${f(y)}" font-size="${size}" font-family="sans-serif" text-anchor="${anchor}"${tr}>${escapeXml(content)}</text>`,
    );
  }

  render(): string {
    const scale = this.dpi / 96;
    const w = f(this.width * scale);
    const h = f(this.height * scale);
    return (
      `<svg xmlns="http://www.w3.org/2000/svg" width="${w}" height="${h}" ` +
      `viewBox="0 0 ${this.width} ${this.height}">\n` +
      `<rect width="${this.width}" height="${this.height}" fill="white"/>\n` +
      this.parts.join("\n") +
      "\n</svg>\n"
    );
  }
}

function f(x: number): string {
  return Number(x.toFixed(3)).toString();
}

function escapeXml(s: string): string {
  return s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

/** Diverging blue-white-red map for signed data, t in [-1, 1]. */
export function diverging(t: number): string {
  const c = Math.max(-1, Math.min(1, t));
  if (c >= 0) {
    const u = 1 - c;
    return rgb(255, Math.round(80 + 175 * u), Math.round(80 + 175 * u));
  }
  const u = 1 + c;
  return rgb(Math.round(70 + 185 * u), Math.round(100 + 155 * u), 255);
}

/** Compact sequential map (dark blue -> green -> yellow), t in [0, 1]. */
export function sequential(t: number): string {
  const u = Math.max(0, Math.min(1, t));
  const r = Math.round(255 * Math.min(1, Math.max(0, 1.8 * u - 0.6)));
  const g = Math.round(255 * Math.min(1, 1.3 * u + 0.05));
  const b = Math.round(255 * Math.max(0, 0.55 - 0.8 * u) + 90 * (1 - u));
  return rgb(r, g, Math.min(255, b));
}

function rgb(r: number, g: number, b: number): string {
  return `rgb(${r},${g},${b})`;
}

export function ticks(lo: number, hi: number, n = 5): number[] {
  if (!(hi > lo)) return [lo];
  const span = hi - lo;
  const step = Math.pow(10, Math.floor(Math.log10(span / n)));
  const candidates = [step, 2 * step, 2.5 * step, 5 * step, 10 * step];
  const chosen = candidates.find((s) => span / s <= n + 1) ?? 10 * step;
  const start = Math.ceil(lo / chosen) * chosen;
  const out: number[] = [];
  for (let v = start; v <= hi + 1e-9 * span; v += chosen) {
    out.push(Number(v.toFixed(10)));
  }
  return out;
}
