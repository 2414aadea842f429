/** Minimal hand-rolled SVG log-log charts (no browser, no deps). */

export interface Series {
  label: string;
  t: number[];
  y: number[];
  color: string;
}

export interface GuideLine {
  /** reference slope drawn through the first point of the first series */
  slope: number;
  label: string;
}

export interface ChartSpec {
  title: string;
  series: Series[];
  guides?: GuideLine[];
  /** horizontal band [lo, hi], e.g. a limit value with tolerance */
  band?: { lo: number; hi: number; label: string };
}

const W = 720;
const H = 480;
const M = { left: 70, right: 170, top: 40, bottom: 50 };

function log10(x: number): number {
  return Math.log(x) / Math.LN10;
}

function ticks(lo: number, hi: number): number[] {
  const out: number[] = [];
  for (let d = Math.floor(lo); d <= Math.ceil(hi); d++) out.push(d);
  return out.filter((d) => d >= lo - 1e-9 && d <= hi + 1e-9);
}

export function renderLogLogChart(spec: ChartSpec): string {
  const pts = spec.series.flatMap((s) =>
    s.t.map((t, i) => [t, s.y[i]] as const).filter(([t, y]) => t > 0 && y > 0),
  );
  if (pts.length === 0) {
    return `<svg xmlns="http://www.w3.org/2000/svg" width="${W}" height="${H}"><text x="20" y="40">${esc(
      spec.title,
    )}: no positive data</text></svg>`;
  }
  let tLo = Math.min(...pts.map((p) => log10(p[0])));
  let tHi = Math.max(...pts.map((p) => log10(p[0])));
  let yLo = Math.min(...pts.map((p) => log10(p[1])));
  let yHi = Math.max(...pts.map((p) => log10(p[1])));
  if (spec.band) {
    yLo = Math.min(yLo, log10(spec.band.lo));
    yHi = Math.max(yHi, log10(spec.band.hi));
  }
  if (tHi - tLo < 1e-9) tHi = tLo + 1;
  if (yHi - yLo < 1e-9) yHi = yLo + 1;
  yLo -= 0.2;
  yHi += 0.2;

  const sx = (t: number) => M.left + ((log10(t) - tLo) / (tHi - tLo)) * (W - M.left - M.right);
  const sy = (y: number) => H - M.bottom - ((log10(y) - yLo) / (yHi - yLo)) * (H - M.top - M.bottom);

  const parts: string[] = [];
  parts.push(
    `<svg xmlns="http://www.w3.org/2000/svg" width="${W}" height="${H}" font-family="monospace" font-size="12">`,
  );
  parts.push(`<rect width="${W}" height="${H}" fill="white"/>`);
  parts.push(`<text x="${M.left}" y="24" font-size="15">${esc(spec.title)}</text>`);

  // axes + decade grid
  for (const d of ticks(tLo, tHi)) {
    const x = sx(10 ** d);
    parts.push(`<line x1="${x}" y1="${M.top}" x2="${x}" y2="${H - M.bottom}" stroke="#ddd"/>`);
    parts.push(`<text x="${x - 12}" y="${H - M.bottom + 18}">1e${d}</text>`);
  }
  for (const d of ticks(yLo, yHi)) {
    const y = sy(10 ** d);
    parts.push(`<line x1="${M.left}" y1="${y}" x2="${W - M.right}" y2="${y}" stroke="#ddd"/>`);
    parts.push(`<text x="8" y="${y + 4}">1e${d}</text>`);
  }
  parts.push(
    `<rect x="${M.left}" y="${M.top}" width="${W - M.left - M.right}" height="${H - M.top - M.bottom}" fill="none" stroke="#333"/>`,
  );
  parts.push(`<text x="${(M.left + W - M.right) / 2 - 10}" y="${H - 12}">t</text>`);

  // threshold band
  if (spec.band) {
    const yTop = sy(spec.band.hi);
    const yBot = sy(spec.band.lo);
    parts.push(
      `<rect x="${M.left}" y="${yTop}" width="${W - M.left - M.right}" height="${yBot - yTop}" fill="#9ad29a" fill-opacity="0.35"/>`,
    );
    parts.push(`<text x="${W - M.right + 6}" y="${(yTop + yBot) / 2}" fill="#2a7">${esc(spec.band.label)}</text>`);
  }

  // slope guides anchored at the first series' first positive point
  const anchor = pts[0];
  for (const g of spec.guides ?? []) {
    const t0 = anchor[0];
    const y0 = anchor[1];
    const t1 = 10 ** tHi;
    const y1 = y0 * (t1 / t0) ** g.slope;
    parts.push(
      `<line x1="${sx(t0)}" y1="${sy(y0)}" x2="${sx(t1)}" y2="${sy(Math.max(y1, 10 ** yLo))}" stroke="#c33" stroke-dasharray="6 4"/>`,
    );
    parts.push(`<text x="${W - M.right + 6}" y="${sy(Math.max(y1, 10 ** yLo)) + 4}" fill="#c33">${esc(g.label)}</text>`);
  }

  // series
  let legendY = M.top + 12;
  for (const s of spec.series) {
    const path = s.t
      .map((t, i) => (t > 0 && s.y[i] > 0 ? `${i === 0 ? "M" : "L"}${sx(t).toFixed(1)},${sy(s.y[i]).toFixed(1)}` : ""))
      .filter((seg) => seg.length > 0);
    // restart path cleanly if the first entries were skipped
    if (path.length > 0 && !path[0].startsWith("M")) path[0] = "M" + path[0].slice(1);
    parts.push(`<path d="${path.join(" ")}" fill="none" stroke="${s.color}" stroke-width="1.6"/>`);
    parts.push(`<text x="${W - M.right + 6}" y="${legendY}" fill="${s.color}">${esc(s.label)}</text>`);
    legendY += 16;
  }
  parts.push("</svg>");
  return parts.join("\n");
}

function esc(s: string): string {
  return s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}
