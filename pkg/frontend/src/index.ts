export { parseCsv, columnIndex, numericColumn, MissingColumnError } from "./csv";
export { parseIni } from "./ini";
export { renderChart } from "./svg";
export type { Series, Point, ChartOptions } from "./svg";
export { buildFigure, render } from "./render";
export type { FigureKind, PlotSpec, RenderResult } from "./render";
export { main, specsFromFile } from "./cli";
