/**
 * Small hand-rolled SVG writer. Figures here are bar groups, line curves,
 * axis ticks, and a legend; pulling in a browser-grade charting stack for
 * that would only add a headless-DOM dependency.
 */

const PALETTE = [
  "#4477aa",
  "#ee6677",
  "#228833",
  "#ccbb44",
  "#66ccee",
  "#aa3377",
  "#bbbbbb",
  "#222222",
];

export function color(i: number): string {
  return PALETTE[i % PALETTE.length];
}

export function esc(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export interface Series {
  label: string;
  values: number[];
  sd?: number[];
}

interface Frame {
  x: number;
  y: number;
  width: number;
  height: number;
  title: string;
  yMax: number;
}

function axes(frame: Frame, xLabels: string[], parts: string[]): void {
  const { x, y, width, height, yMax } = frame;
  parts.push(
    `<text x="${x + width / 2}" y="${y - 8}" text-anchor="middle" ` +
      `font-size="13" font-weight="bold">${esc(frame.title)}</text>`,
  );
  parts.push(
    `<line x1="${x}" y1="${y}" x2="${x}" y2="${y + height}" stroke="#333"/>`,
    `<line x1="${x}" y1="${y + height}" x2="${x + width}" y2="${y + height}" stroke="#333"/>`,
  );
  const ticks = 5;
  for (let i = 0; i <= ticks; i++) {
    const value = (yMax * i) / ticks;
    const ty = y + height - (height * i) / ticks;
    parts.push(
      `<line x1="${x - 3}" y1="${ty}" x2="${x}" y2="${ty}" stroke="#333"/>`,
      `<text x="${x - 6}" y="${ty + 3}" text-anchor="end" font-size="10">` +
        `${value.toFixed(2)}</text>`,
    );
  }
  const step = width / xLabels.length;
  xLabels.forEach((label, i) => {
    parts.push(
      `<text x="${x + step * (i + 0.5)}" y="${y + height + 14}" ` +
        `text-anchor="middle" font-size="10">${esc(label)}</text>`,
    );
  });
}

function yMaxOf(series: Series[]): number {
  let top = 0;
  for (const s of series) {
    s.values.forEach((v, i) => {
      top = Math.max(top, v + (s.sd ? s.sd[i] : 0));
    });
  }
  return top <= 1.0 ? 1.0 : top * 1.05;
}

/** Grouped vertical bars with one bar per series inside every category. */
export function barPanel(
  x: number,
  y: number,
  width: number,
  height: number,
  title: string,
  categories: string[],
  series: Series[],
): string {
  const parts: string[] = [];
  const yMax = yMaxOf(series);
  axes({ x, y, width, height, title, yMax }, categories, parts);
  const slot = width / categories.length;
  const barWidth = (slot * 0.8) / series.length;
  const toY = (v: number) => y + height - (height * v) / yMax;
  series.forEach((s, si) => {
    s.values.forEach((value, ci) => {
      const bx = x + slot * ci + slot * 0.1 + barWidth * si;
      parts.push(
        `<rect x="${bx}" y="${toY(value)}" width="${barWidth}" ` +
          `height="${y + height - toY(value)}" fill="${color(si)}"/>`,
      );
      const sd = s.sd ? s.sd[ci] : 0;
      if (sd > 0) {
        const cx = bx + barWidth / 2;
        parts.push(
          `<line x1="${cx}" y1="${toY(value - sd)}" x2="${cx}" ` +
            `y2="${toY(Math.min(yMax, value + sd))}" stroke="#333"/>`,
        );
      }
    });
  });
  return parts.join("\n");
}

/** Line curves over a shared numeric x grid. */
export function curvePanel(
  x: number,
  y: number,
  width: number,
  height: number,
  title: string,
  xValues: number[],
  series: Series[],
): string {
  const parts: string[] = [];
  const yMax = yMaxOf(series);
  const xMin = xValues[0];
  const xSpan = xValues[xValues.length - 1] - xMin || 1;
  const labels = [xMin, xMin + xSpan / 2, xMin + xSpan].map((v) =>
    Number.isInteger(v) ? String(v) : v.toFixed(2),
  );
  axes({ x, y, width, height, title, yMax }, labels, parts);
  const toX = (v: number) => x + (width * (v - xMin)) / xSpan;
  const toY = (v: number) => y + height - (height * v) / yMax;
  series.forEach((s, si) => {
    const points = s.values
      .map((v, i) => `${toX(xValues[i]).toFixed(2)},${toY(v).toFixed(2)}`)
      .join(" ");
    parts.push(
      `<polyline points="${points}" fill="none" stroke="${color(si)}" stroke-width="1.5"/>`,
    );
  });
  return parts.join("\n");
}

export function legend(x: number, y: number, labels: string[]): string {
  return labels
    .map((label, i) => {
      const ly = y + i * 18;
      return (
        `<rect x="${x}" y="${ly}" width="12" height="12" fill="${color(i)}"/>` +
        `<text x="${x + 18}" y="${ly + 10}" font-size="11">${esc(label)}</text>`
      );
    })
    .join("\n");
}

export function svgDocument(width: number, height: number, body: string[]): string {
  return [
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" ` +
      `viewBox="0 0 ${width} ${height}" font-family="sans-serif">`,
    `<rect width="${width}" height="${height}" fill="white"/>`,
    ...body,
    "</svg>",
    "",
  ].join("\n");
}
