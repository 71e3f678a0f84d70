/** Tiny deterministic SVG chart builder: line charts with optional
 * vertical error bars and a legend.  Output depends only on the input
 * series, so identical data yields identical bytes. */

export interface Point {
  x: number;
  y: number;
  err?: number;
}

export interface Series {
  label: string;
  points: Point[];
}

export interface ChartOptions {
  title: string;
  xLabel: string;
  yLabel: string;
  width?: number;
  height?: number;
}

const PALETTE = [
  "#c0392b",
  "#2980b9",
  "#27ae60",
  "#8e44ad",
  "#f39c12",
  "#16a085",
  "#7f8c8d",
  "#d35400",
];

const MARGIN = { top: 40, right: 24, bottom: 48, left: 64 };

function fmt(v: number): string {
  return v.toFixed(2);
}

function tickLabel(v: number): string {
  if (v === 0) return "0";
  const a = Math.abs(v);
  if (a >= 1000 || a < 0.01) return v.toExponential(1);
  return String(Number(v.toPrecision(4)));
}

function escapeXml(s: string): string {
  return s
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export function renderChart(series: Series[], opts: ChartOptions): string {
  const width = opts.width ?? 640;
  const height = opts.height ?? 420;
  const plotW = width - MARGIN.left - MARGIN.right;
  const plotH = height - MARGIN.top - MARGIN.bottom;

  const xs: number[] = [];
  const ys: number[] = [];
  for (const s of series) {
    for (const p of s.points) {
      xs.push(p.x);
      ys.push(p.y - (p.err ?? 0), p.y + (p.err ?? 0));
    }
  }
  const hasData = xs.length > 0;
  let xMin = hasData ? Math.min(...xs) : 0;
  let xMax = hasData ? Math.max(...xs) : 1;
  let yMin = hasData ? Math.min(...ys) : 0;
  let yMax = hasData ? Math.max(...ys) : 1;
  if (xMax === xMin) {
    xMin -= 0.5;
    xMax += 0.5;
  }
  if (yMax === yMin) {
    yMin -= 0.5;
    yMax += 0.5;
  }
  const yPad = (yMax - yMin) * 0.05;
  yMin -= yPad;
  yMax += yPad;

  const sx = (x: number) => MARGIN.left + ((x - xMin) / (xMax - xMin)) * plotW;
  const sy = (y: number) => MARGIN.top + (1 - (y - yMin) / (yMax - yMin)) * plotH;

  const parts: string[] = [];
  parts.push(
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" viewBox="0 0 ${width} ${height}">`,
  );
  parts.push(`<rect width="${width}" height="${height}" fill="white"/>`);
  parts.push(
    `<text x="${width / 2}" y="22" text-anchor="middle" font-family="sans-serif" font-size="15">${escapeXml(opts.title)}</text>`,
  );

  // axes
  const axisColor = "#333333";
  parts.push(
    `<line x1="${MARGIN.left}" y1="${MARGIN.top + plotH}" x2="${MARGIN.left + plotW}" y2="${MARGIN.top + plotH}" stroke="${axisColor}"/>`,
  );
  parts.push(
    `<line x1="${MARGIN.left}" y1="${MARGIN.top}" x2="${MARGIN.left}" y2="${MARGIN.top + plotH}" stroke="${axisColor}"/>`,
  );
  for (let i = 0; i <= 4; i++) {
    const tx = xMin + ((xMax - xMin) * i) / 4;
    const ty = yMin + ((yMax - yMin) * i) / 4;
    const px = sx(tx);
    const py = sy(ty);
    parts.push(
      `<line x1="${fmt(px)}" y1="${MARGIN.top + plotH}" x2="${fmt(px)}" y2="${MARGIN.top + plotH + 5}" stroke="${axisColor}"/>`,
    );
    parts.push(
      `<text x="${fmt(px)}" y="${MARGIN.top + plotH + 20}" text-anchor="middle" font-family="sans-serif" font-size="11">${tickLabel(tx)}</text>`,
    );
    parts.push(
      `<line x1="${MARGIN.left - 5}" y1="${fmt(py)}" x2="${MARGIN.left}" y2="${fmt(py)}" stroke="${axisColor}"/>`,
    );
    parts.push(
      `<text x="${MARGIN.left - 8}" y="${fmt(py + 4)}" text-anchor="end" font-family="sans-serif" font-size="11">${tickLabel(ty)}</text>`,
    );
  }
  parts.push(
    `<text x="${MARGIN.left + plotW / 2}" y="${height - 10}" text-anchor="middle" font-family="sans-serif" font-size="12">${escapeXml(opts.xLabel)}</text>`,
  );
  parts.push(
    `<text x="16" y="${MARGIN.top + plotH / 2}" text-anchor="middle" font-family="sans-serif" font-size="12" transform="rotate(-90 16 ${MARGIN.top + plotH / 2})">${escapeXml(opts.yLabel)}</text>`,
  );

  // series
  series.forEach((s, si) => {
    const color = PALETTE[si % PALETTE.length];
    const sorted = [...s.points].sort((a, b) => a.x - b.x);
    if (sorted.length > 0) {
      const path = sorted
        .map((p, i) => `${i === 0 ? "M" : "L"}${fmt(sx(p.x))} ${fmt(sy(p.y))}`)
        .join(" ");
      parts.push(
        `<path d="${path}" fill="none" stroke="${color}" stroke-width="1.8"/>`,
      );
    }
    for (const p of sorted) {
      parts.push(
        `<circle cx="${fmt(sx(p.x))}" cy="${fmt(sy(p.y))}" r="3" fill="${color}"/>`,
      );
      if (p.err !== undefined && p.err > 0) {
        const x = sx(p.x);
        const yLo = sy(p.y - p.err);
        const yHi = sy(p.y + p.err);
        parts.push(
          `<line class="errbar" x1="${fmt(x)}" y1="${fmt(yLo)}" x2="${fmt(x)}" y2="${fmt(yHi)}" stroke="${color}" stroke-width="1"/>`,
        );
        parts.push(
          `<line x1="${fmt(x - 3)}" y1="${fmt(yLo)}" x2="${fmt(x + 3)}" y2="${fmt(yLo)}" stroke="${color}" stroke-width="1"/>`,
        );
        parts.push(
          `<line x1="${fmt(x - 3)}" y1="${fmt(yHi)}" x2="${fmt(x + 3)}" y2="${fmt(yHi)}" stroke="${color}" stroke-width="1"/>`,
        );
      }
    }
  });

  // legend, top-right inside the plot area
  series.forEach((s, si) => {
    const color = PALETTE[si % PALETTE.length];
    const y = MARGIN.top + 14 + si * 16;
    const x = MARGIN.left + plotW - 150;
    parts.push(
      `<line x1="${x}" y1="${y - 4}" x2="${x + 18}" y2="${y - 4}" stroke="${color}" stroke-width="2"/>`,
    );
    parts.push(
      `<text class="legend" x="${x + 24}" y="${y}" font-family="sans-serif" font-size="11">${escapeXml(s.label)}</text>`,
    );
  });

  parts.push("</svg>");
  return parts.join("\n") + "\n";
}
