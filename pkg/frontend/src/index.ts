/**
 * Public entry points for the figure generator.
 */

export { buildFigure, type FigureResult } from "./figure.js";
export { defaultSidecarPath, loadPlotSpec, validatePlotSpec,
         type PlotSpec } from "./plotSpec.js";
export { CSV_COLUMNS, EXPERIMENT_KINDS, parseResultCsv, parseSidecar,
         type ExperimentKind, type ResultRow, type ResultTable,
         type Sidecar } from "./schema.js";
export { figureData, type FigureData, type PanelData,
         type Series } from "./series.js";
export { renderFigure, type RenderOptions } from "./svg.js";
export { canonicalJson, configHash } from "./util.js";
