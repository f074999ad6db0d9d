/** Summary-CSV parsing for the plotting frontend.
 *
 * The harness writes rows `experiment,I,N,R,stat,mse,fim_trace` with
 * stat in {mean,min,max,median,qlo,qhi}. Raw value strings are kept
 * alongside the parsed numbers so renders can embed the CSV values
 * byte-for-byte.
 */

export const SUMMARY_HEADER = "experiment,I,N,R,stat,mse,fim_trace";
export const STATS = ["mean", "min", "max", "median", "qlo", "qhi"] as const;
export type Stat = (typeof STATS)[number];
export const SERIES = ["mse", "fim_trace"] as const;
export type SeriesName = (typeof SERIES)[number];

export interface ValueCell {
  value: number;
  raw: string;
}

export interface SummaryPoint {
  I: number;
  stats: Record<SeriesName, Record<Stat, ValueCell>>;
}

export interface SummaryTable {
  experiment: string;
  N: number;
  R: number;
  points: SummaryPoint[]; // ascending I
}

export class SchemaError extends Error {}

function parseNumber(raw: string, where: string): number {
  const value = Number(raw);
  if (!Number.isFinite(value)) {
    throw new SchemaError(`${where}: expected a finite number, got "${raw}"`);
  }
  return value;
}

export function parseSummaryCsv(text: string): SummaryTable {
  const lines = text.split(/\r?\n/).filter((line) => line.length > 0);
  if (lines.length === 0) {
    throw new SchemaError("empty CSV");
  }
  const header = lines[0].split(",").map((c) => c.trim());
  const expected = SUMMARY_HEADER.split(",");
  for (const column of expected) {
    if (!header.includes(column)) {
      throw new SchemaError(`missing column "${column}" in header "${lines[0]}"`);
    }
  }
  const col = (name: string) => header.indexOf(name);

  const combos = new Set<string>();
  const byI = new Map<number, SummaryPoint>();
  let experiment = "";
  let N = 0;
  let R = 0;
  for (let i = 1; i < lines.length; i++) {
    const cells = lines[i].split(",");
    if (cells.length !== header.length) {
      throw new SchemaError(`line ${i + 1}: expected ${header.length} cells, got ${cells.length}`);
    }
    experiment = cells[col("experiment")];
    const I = parseNumber(cells[col("I")], `line ${i + 1} (I)`);
    N = parseNumber(cells[col("N")], `line ${i + 1} (N)`);
    R = parseNumber(cells[col("R")], `line ${i + 1} (R)`);
    combos.add(`${experiment}/${N}/${R}`);
    if (combos.size > 1) {
      throw new SchemaError(
        `summary mixes several (experiment, N, R) groups: ${[...combos].join(", ")}`,
      );
    }
    const stat = cells[col("stat")] as Stat;
    if (!STATS.includes(stat)) {
      throw new SchemaError(`line ${i + 1}: unknown stat "${stat}"`);
    }
    let point = byI.get(I);
    if (!point) {
      point = { I, stats: { mse: {} as never, fim_trace: {} as never } };
      byI.set(I, point);
    }
    for (const series of SERIES) {
      const raw = cells[col(series)];
      point.stats[series][stat] = { value: parseNumber(raw, `line ${i + 1} (${series})`), raw };
    }
  }

  const points = [...byI.values()].sort((a, b) => a.I - b.I);
  if (points.length === 0) {
    throw new SchemaError("no data rows");
  }
  for (const point of points) {
    for (const series of SERIES) {
      for (const stat of STATS) {
        if (!point.stats[series][stat]) {
          throw new SchemaError(`I=${point.I}: missing ${series}/${stat} row`);
        }
      }
    }
  }
  return { experiment, N, R, points };
}
