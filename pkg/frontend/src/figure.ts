/** Deterministic SVG figures from parsed summary tables.
 *
 * Two kinds: "errorbar" draws the mean with min/max whiskers, "quantile"
 * draws the median with a shaded band between the qlo and qhi percentiles.
 * Every plotted datum is emitted as a <circle> carrying data-series /
 * data-stat / data-i / data-value attributes, where data-value is the raw
 * CSV string, so the rendered figure embeds the source values exactly.
 */

import { SERIES, STATS, SeriesName, Stat, SummaryPoint, SummaryTable } from "./csv.js";

export type FigureKind = "errorbar" | "quantile";

export interface FigureSpec {
  kind: FigureKind;
  logY: boolean;
  title?: string;
}

const WIDTH = 720;
const HEIGHT = 480;
const MARGIN = { top: 48, right: 36, bottom: 56, left: 78 };
const COLORS: Record<SeriesName, string> = { mse: "#1f77b4", fim_trace: "#d62728" };
const LABELS: Record<SeriesName, string> = { mse: "MSE", fim_trace: "FIM-PI trace" };

const KIND_STATS: Record<FigureKind, Stat[]> = {
  errorbar: ["mean", "min", "max"],
  quantile: ["median", "qlo", "qhi"],
};

function fmt(x: number): string {
  if (!Number.isFinite(x)) throw new Error(`non-finite coordinate ${x}`);
  return x.toFixed(3).replace(/\.?0+$/, "");
}

function fmtTick(x: number): string {
  return Number(x.toPrecision(4)).toString();
}

interface Scale {
  (value: number): number;
}

function linearScale(lo: number, hi: number, outLo: number, outHi: number): Scale {
  const span = hi - lo || 1;
  return (v) => outLo + ((v - lo) / span) * (outHi - outLo);
}

function makeYScale(values: number[], logY: boolean): { scale: Scale; ticks: number[] } {
  if (logY) {
    if (values.some((v) => v <= 0)) {
      throw new Error("log-scale y requires strictly positive values");
    }
    const lo = Math.log10(Math.min(...values));
    const hi = Math.log10(Math.max(...values));
    const pad = (hi - lo || 1) * 0.05;
    const s = linearScale(lo - pad, hi + pad, HEIGHT - MARGIN.bottom, MARGIN.top);
    const ticks: number[] = [];
    for (let p = Math.ceil(lo - pad); p <= Math.floor(hi + pad); p += 1) {
      ticks.push(Math.pow(10, p));
    }
    if (ticks.length < 2) ticks.push(Math.pow(10, lo), Math.pow(10, hi));
    return { scale: (v) => s(Math.log10(v)), ticks };
  }
  const lo = Math.min(...values, 0);
  const hi = Math.max(...values);
  const pad = (hi - lo || 1) * 0.05;
  const scale = linearScale(lo, hi + pad, HEIGHT - MARGIN.bottom, MARGIN.top);
  const ticks = [0, 0.25, 0.5, 0.75, 1].map((t) => lo + t * (hi + pad - lo));
  return { scale, ticks };
}

function dataCircle(
  x: number,
  y: number,
  series: SeriesName,
  stat: Stat,
  point: SummaryPoint,
  visible: boolean,
): string {
  const raw = point.stats[series][stat].raw;
  const r = visible ? 3.5 : 1.5;
  const fill = visible ? COLORS[series] : "none";
  const stroke = visible ? "none" : COLORS[series];
  return (
    `<circle cx="${fmt(x)}" cy="${fmt(y)}" r="${r}" fill="${fill}" stroke="${stroke}" ` +
    `data-series="${series}" data-stat="${stat}" data-i="${point.I}" data-value="${raw}"/>`
  );
}

export function renderFigure(table: SummaryTable, spec: FigureSpec): string {
  const stats = KIND_STATS[spec.kind];
  const [center, lower, upper] = stats;
  const xs = table.points.map((p) => p.I);
  const xScale = linearScale(
    Math.min(...xs),
    Math.max(...xs),
    MARGIN.left,
    WIDTH - MARGIN.right,
  );
  const needed = table.points.flatMap((p) =>
    SERIES.flatMap((s) => stats.map((st) => p.stats[s][st].value)),
  );
  const { scale: yScale, ticks } = makeYScale(needed, spec.logY);

  const parts: string[] = [];
  parts.push(
    `<svg xmlns="http://www.w3.org/2000/svg" width="${WIDTH}" height="${HEIGHT}" ` +
      `viewBox="0 0 ${WIDTH} ${HEIGHT}" font-family="Helvetica, Arial, sans-serif">`,
  );
  parts.push(`<rect width="${WIDTH}" height="${HEIGHT}" fill="white"/>`);
  const title =
    spec.title ?? `${table.experiment} (N=${table.N}, R=${table.R}), ${spec.kind}`;
  parts.push(
    `<text x="${WIDTH / 2}" y="28" text-anchor="middle" font-size="16">${title}</text>`,
  );

  // axes
  const x0 = MARGIN.left;
  const x1 = WIDTH - MARGIN.right;
  const y0 = HEIGHT - MARGIN.bottom;
  parts.push(`<line x1="${x0}" y1="${y0}" x2="${x1}" y2="${y0}" stroke="black"/>`);
  parts.push(`<line x1="${x0}" y1="${y0}" x2="${x0}" y2="${MARGIN.top}" stroke="black"/>`);
  for (const I of xs) {
    const px = xScale(I);
    parts.push(`<line x1="${fmt(px)}" y1="${y0}" x2="${fmt(px)}" y2="${y0 + 5}" stroke="black"/>`);
    parts.push(
      `<text x="${fmt(px)}" y="${y0 + 22}" text-anchor="middle" font-size="12">${I}</text>`,
    );
  }
  parts.push(
    `<text x="${(x0 + x1) / 2}" y="${HEIGHT - 14}" text-anchor="middle" font-size="13">dimension size I</text>`,
  );
  for (const tick of ticks) {
    const py = yScale(tick);
    if (py < MARGIN.top - 1 || py > y0 + 1) continue;
    parts.push(`<line x1="${x0 - 5}" y1="${fmt(py)}" x2="${x0}" y2="${fmt(py)}" stroke="black"/>`);
    parts.push(
      `<text x="${x0 - 9}" y="${fmt(py + 4)}" text-anchor="end" font-size="12">${fmtTick(tick)}</text>`,
    );
  }

  for (const series of SERIES) {
    const color = COLORS[series];
    const coords = table.points.map((p) => ({
      point: p,
      x: xScale(p.I),
      yc: yScale(p.stats[series][center].value),
      ylo: yScale(p.stats[series][lower].value),
      yhi: yScale(p.stats[series][upper].value),
    }));

    if (spec.kind === "quantile") {
      const forward = coords.map((c) => `${fmt(c.x)},${fmt(c.ylo)}`);
      const backward = [...coords].reverse().map((c) => `${fmt(c.x)},${fmt(c.yhi)}`);
      parts.push(
        `<polygon points="${forward.join(" ")} ${backward.join(" ")}" ` +
          `fill="${color}" fill-opacity="0.18" stroke="none" data-band="${series}"/>`,
      );
    } else {
      for (const c of coords) {
        parts.push(
          `<line x1="${fmt(c.x)}" y1="${fmt(c.ylo)}" x2="${fmt(c.x)}" y2="${fmt(c.yhi)}" ` +
            `stroke="${color}" stroke-width="1.5" data-whisker="${series}"/>`,
        );
        for (const y of [c.ylo, c.yhi]) {
          parts.push(
            `<line x1="${fmt(c.x - 5)}" y1="${fmt(y)}" x2="${fmt(c.x + 5)}" y2="${fmt(y)}" ` +
              `stroke="${color}" stroke-width="1.5"/>`,
          );
        }
      }
    }

    const line = coords.map((c) => `${fmt(c.x)},${fmt(c.yc)}`).join(" ");
    parts.push(
      `<polyline points="${line}" fill="none" stroke="${color}" stroke-width="2" data-line="${series}"/>`,
    );
    for (const c of coords) {
      parts.push(dataCircle(c.x, c.yc, series, center, c.point, true));
      parts.push(dataCircle(c.x, c.ylo, series, lower, c.point, false));
      parts.push(dataCircle(c.x, c.yhi, series, upper, c.point, false));
    }
  }

  // legend
  SERIES.forEach((series, k) => {
    const lx = WIDTH - MARGIN.right - 170;
    const ly = MARGIN.top + 8 + 20 * k;
    parts.push(
      `<line x1="${lx}" y1="${ly}" x2="${lx + 26}" y2="${ly}" stroke="${COLORS[series]}" stroke-width="2"/>`,
    );
    parts.push(
      `<text x="${lx + 32}" y="${ly + 4}" font-size="12">${LABELS[series]}</text>`,
    );
  });

  parts.push("</svg>");
  return parts.join("\n") + "\n";
}
