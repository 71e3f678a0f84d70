/** Figure builders: turn the simulator's CSVs into SVG line charts.
 *
 * Three kinds are supported, matching the experiment pipeline's outputs:
 *   welfare_vs_irc  - one curve per strategy (legend labels verbatim)
 *   wr_vs_epsbar    - achieved and bound welfare ratios vs mean ratio
 *   gap_vs_T        - expected-vs-strict welfare gap vs horizon
 *
 * No statistics are recomputed here: points come straight from the CSV
 * (means and stderr columns), so a figure is a pure function of the
 * input bytes.
 */

import * as fs from "node:fs";

import {
  Table,
  columnIndex,
  numericColumn,
  optionalColumnIndex,
  parseCsv,
} from "./csv";
import { Series, renderChart } from "./svg";

export type FigureKind = "welfare_vs_irc" | "wr_vs_epsbar" | "gap_vs_T";

export interface PlotSpec {
  kind: FigureKind;
  input: string;
  output: string;
  title?: string;
}

export interface RenderResult {
  output: string;
  curves: number;
  pointsPerCurve: number[];
  warning?: string;
}

function seriesFromGroups(
  table: Table,
  xCol: string,
  yCol: string,
  errCol: string | null,
  groupCol: string,
): Series[] {
  const gi = columnIndex(table, groupCol);
  const xs = numericColumn(table, xCol);
  const ys = numericColumn(table, yCol);
  const ei = errCol === null ? -1 : optionalColumnIndex(table, errCol);
  const order: string[] = [];
  const groups = new Map<string, Series>();
  table.rows.forEach((row, i) => {
    const label = row[gi];
    if (!groups.has(label)) {
      order.push(label);
      groups.set(label, { label, points: [] });
    }
    const p: { x: number; y: number; err?: number } = { x: xs[i], y: ys[i] };
    if (ei >= 0) {
      const e = Number(row[ei]);
      if (Number.isFinite(e) && e > 0) p.err = e;
    }
    groups.get(label)!.points.push(p);
  });
  return order.map((label) => groups.get(label)!);
}

function seriesFromColumns(
  table: Table,
  xCol: string,
  columns: { y: string; err: string | null }[],
): Series[] {
  const xs = numericColumn(table, xCol);
  return columns.map(({ y, err }) => {
    const ys = numericColumn(table, y);
    const ei = err === null ? -1 : optionalColumnIndex(table, err);
    const points = xs.map((x, i) => {
      const p: { x: number; y: number; err?: number } = { x, y: ys[i] };
      if (ei >= 0) {
        const e = Number(table.rows[i][ei]);
        if (Number.isFinite(e) && e > 0) p.err = e;
      }
      return p;
    });
    return { label: y, points };
  });
}

export function buildFigure(spec: PlotSpec, csvText: string): {
  svg: string;
  curves: number;
  pointsPerCurve: number[];
  warning?: string;
} {
  const table = parseCsv(csvText);
  let series: Series[];
  let xLabel: string;
  let yLabel: string;
  switch (spec.kind) {
    case "welfare_vs_irc":
      // validate contract columns even when the table is empty
      columnIndex(table, "irc");
      columnIndex(table, "strategy");
      columnIndex(table, "mean_welfare");
      series = seriesFromGroups(table, "irc", "mean_welfare", "stderr", "strategy");
      xLabel = "irc";
      yLabel = "mean_welfare";
      break;
    case "wr_vs_epsbar":
      columnIndex(table, "eps_bar");
      columnIndex(table, "achieved_wr");
      columnIndex(table, "bound_wr");
      series = seriesFromColumns(table, "eps_bar", [
        { y: "achieved_wr", err: "achieved_wr_stderr" },
        { y: "bound_wr", err: "bound_wr_stderr" },
      ]);
      xLabel = "eps_bar";
      yLabel = "welfare ratio";
      break;
    case "gap_vs_T":
      columnIndex(table, "T");
      columnIndex(table, "gap");
      series = seriesFromColumns(table, "T", [{ y: "gap", err: "gap_stderr" }]);
      xLabel = "T";
      yLabel = "gap";
      break;
    default:
      throw new Error(
        `unknown figure kind '${(spec as PlotSpec).kind}'; expected welfare_vs_irc, wr_vs_epsbar or gap_vs_T`,
      );
  }
  series = series.filter((s) => s.points.length > 0);
  const warning =
    table.rows.length === 0 ? `${spec.input}: no data rows, empty axes` : undefined;
  const svg = renderChart(series, {
    title: spec.title ?? spec.kind,
    xLabel,
    yLabel,
  });
  return {
    svg,
    curves: series.length,
    pointsPerCurve: series.map((s) => s.points.length),
    warning,
  };
}

export function render(spec: PlotSpec): RenderResult {
  const csvText = fs.readFileSync(spec.input, "utf8");
  const { svg, curves, pointsPerCurve, warning } = buildFigure(spec, csvText);
  fs.writeFileSync(spec.output, svg);
  return { output: spec.output, curves, pointsPerCurve, warning };
}
