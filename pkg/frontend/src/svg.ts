/**
 * Deterministic SVG rendering.
 *
 * No timestamps, no randomness, no locale-dependent formatting: the same
 * figure data always serialises to the same bytes. Each figure carries a
 * machine-readable dump of exactly what was plotted in a <metadata> block,
 * and the caption names the experiment, its kind, and the hash of the
 * config that produced the data.
 */

import type { FigureData, PanelData, Series } from "./series.js";
import { canonicalJson, px, xmlEscape } from "./util.js";

export interface RenderOptions {
  title: string;
  experimentId: string;
  configHash: string;
}

const WIDTH = 1000;
const HEIGHT = 430;
const MARGIN = { top: 52, right: 18, bottom: 64, left: 74 };
const PANEL_GAP = 58;

// Okabe-Ito palette: colour-blind safe, fixed order.
const PALETTE = [
  "#0072b2", "#d55e00", "#009e73", "#cc79a7",
  "#e69f00", "#56b4e9", "#f0e442", "#000000",
];

interface Scale {
  toPx(value: number): number;
  ticks: number[];
  min: number;
  max: number;
}

/** Linear scale with 1/2/5-step ticks covering the data. */
function linearScale(lo: number, hi: number, pxLo: number,
                     pxHi: number): Scale {
  if (lo === hi) {
    lo -= 1;
    hi += 1;
  }
  const span = hi - lo;
  const rawStep = span / 5;
  const mag = Math.pow(10, Math.floor(Math.log10(rawStep)));
  const residual = rawStep / mag;
  const step = (residual >= 5 ? 5 : residual >= 2 ? 2 : 1) * mag;
  const min = Math.floor(lo / step) * step;
  const max = Math.ceil(hi / step) * step;
  const ticks: number[] = [];
  for (let v = min; v <= max + step / 2; v += step) {
    ticks.push(Math.round(v / step) * step);
  }
  return {
    toPx: (value) => pxLo + ((value - min) / (max - min)) * (pxHi - pxLo),
    ticks,
    min,
    max,
  };
}

/** Log scale over whole decades; non-positive values clamp to the floor. */
function logScale(minPos: number, hi: number, pxLo: number,
                  pxHi: number): Scale {
  let dLo = Math.floor(Math.log10(minPos));
  let dHi = Math.ceil(Math.log10(hi));
  if (dLo === dHi) {
    dLo -= 1;
    dHi += 1;
  }
  const decades: number[] = [];
  const stride = dHi - dLo > 8 ? 2 : 1;
  for (let d = dLo; d <= dHi; d += stride) {
    decades.push(d);
  }
  const min = Math.pow(10, dLo);
  const max = Math.pow(10, dHi);
  return {
    toPx: (value) => {
      const clamped = Math.max(value, min);
      return pxLo +
        ((Math.log10(clamped) - dLo) / (dHi - dLo)) * (pxHi - pxLo);
    },
    ticks: decades.map((d) => Math.pow(10, d)),
    min,
    max,
  };
}

function tickLabel(value: number, log: boolean): string {
  if (log) {
    const exp = Math.round(Math.log10(value));
    return exp >= 0 && exp <= 2 ? String(value) : `1e${exp}`;
  }
  return String(Math.round(value * 1e6) / 1e6);
}

function panelExtents(panel: PanelData): {
  xLo: number; xHi: number; yMinPos: number; yHi: number;
} {
  let xLo = Infinity;
  let xHi = -Infinity;
  let yMinPos = Infinity;
  let yHi = -Infinity;
  for (const s of panel.series) {
    for (let i = 0; i < s.x.length; i++) {
      const x = s.x[i] ?? 0;
      const mean = s.mean[i] ?? 0;
      const std = s.std[i] ?? 0;
      xLo = Math.min(xLo, x);
      xHi = Math.max(xHi, x);
      const hi = mean + std;
      if (hi > 0) {
        yHi = Math.max(yHi, hi);
      }
      const candidates = [mean, mean - std];
      for (const c of candidates) {
        if (c > 0) {
          yMinPos = Math.min(yMinPos, c);
        }
      }
    }
  }
  if (!Number.isFinite(yMinPos)) {
    yMinPos = 1e-6;
    yHi = 1;
  }
  return { xLo, xHi, yMinPos, yHi };
}

function renderSeries(s: Series, color: string, xs: Scale,
                      ys: Scale): string[] {
  const parts: string[] = [];
  const bandUpper = s.x.map((x, i) =>
    `${px(xs.toPx(x))},${px(ys.toPx((s.mean[i] ?? 0) + (s.std[i] ?? 0)))}`);
  const bandLower = [...s.x].reverse().map((x, iRev) => {
    const i = s.x.length - 1 - iRev;
    return `${px(xs.toPx(x))},${px(ys.toPx((s.mean[i] ?? 0) - (s.std[i] ?? 0)))}`;
  });
  if (s.x.length > 1) {
    parts.push(
      `<polygon fill="${color}" fill-opacity="0.15" stroke="none" ` +
      `points="${bandUpper.join(" ")} ${bandLower.join(" ")}"/>`);
    const line = s.x.map((x, i) =>
      `${i === 0 ? "M" : "L"}${px(xs.toPx(x))},` +
      `${px(ys.toPx(s.mean[i] ?? 0))}`).join("");
    parts.push(
      `<path fill="none" stroke="${color}" stroke-width="1.8" d="${line}"/>`);
  }
  for (let i = 0; i < s.x.length; i++) {
    parts.push(
      `<circle cx="${px(xs.toPx(s.x[i] ?? 0))}" ` +
      `cy="${px(ys.toPx(s.mean[i] ?? 0))}" r="3" fill="${color}"/>`);
  }
  return parts;
}

function renderPanel(panel: PanelData, panelIndex: number, x0: number,
                     x1: number): string[] {
  const y0 = MARGIN.top;
  const y1 = HEIGHT - MARGIN.bottom;
  const parts: string[] = [];
  parts.push(`<g id="panel-${panel.metric}">`);
  parts.push(
    `<rect x="${px(x0)}" y="${px(y0)}" width="${px(x1 - x0)}" ` +
    `height="${px(y1 - y0)}" fill="none" stroke="#444" stroke-width="1"/>`);

  if (panel.series.length === 0) {
    parts.push(
      `<text x="${px((x0 + x1) / 2)}" y="${px((y0 + y1) / 2)}" ` +
      `text-anchor="middle" font-size="13" fill="#666">no data</text>`);
    parts.push(`</g>`);
    return parts;
  }

  const ext = panelExtents(panel);
  const xs = linearScale(ext.xLo, ext.xHi, x0, x1);
  const ys = logScale(ext.yMinPos, ext.yHi, y1, y0);

  for (const tick of xs.ticks) {
    const tx = xs.toPx(tick);
    parts.push(
      `<line x1="${px(tx)}" y1="${px(y1)}" x2="${px(tx)}" ` +
      `y2="${px(y1 + 5)}" stroke="#444" stroke-width="1"/>`);
    parts.push(
      `<text x="${px(tx)}" y="${px(y1 + 20)}" text-anchor="middle" ` +
      `font-size="11">${xmlEscape(tickLabel(tick, false))}</text>`);
  }
  for (const tick of ys.ticks) {
    const ty = ys.toPx(tick);
    parts.push(
      `<line x1="${px(x0)}" y1="${px(ty)}" x2="${px(x1)}" y2="${px(ty)}" ` +
      `stroke="#ddd" stroke-width="0.6"/>`);
    parts.push(
      `<text x="${px(x0 - 6)}" y="${px(ty + 3.5)}" text-anchor="end" ` +
      `font-size="11">${xmlEscape(tickLabel(tick, true))}</text>`);
  }

  parts.push(
    `<text x="${px((x0 + x1) / 2)}" y="${px(y1 + 42)}" ` +
    `text-anchor="middle" font-size="12">${xmlEscape(panel.xLabel)}</text>`);
  parts.push(
    `<text x="${px(x0 - 56)}" y="${px((y0 + y1) / 2)}" ` +
    `text-anchor="middle" font-size="12" ` +
    `transform="rotate(-90 ${px(x0 - 56)} ${px((y0 + y1) / 2)})">` +
    `${xmlEscape(panel.yLabel)}</text>`);

  panel.series.forEach((s, i) => {
    const color = PALETTE[i % PALETTE.length] ?? "#000000";
    parts.push(...renderSeries(s, color, xs, ys));
  });

  // Legend block, top-right corner of the panel.
  const legendX = x1 - 130;
  let legendY = y0 + 14;
  for (let i = 0; i < panel.series.length; i++) {
    const s = panel.series[i];
    const color = PALETTE[i % PALETTE.length] ?? "#000000";
    parts.push(
      `<line x1="${px(legendX)}" y1="${px(legendY - 3.5)}" ` +
      `x2="${px(legendX + 18)}" y2="${px(legendY - 3.5)}" ` +
      `stroke="${color}" stroke-width="1.8"/>`);
    parts.push(
      `<text x="${px(legendX + 23)}" y="${px(legendY)}" font-size="11">` +
      `${xmlEscape(s?.label ?? "")}</text>`);
    legendY += 15;
  }

  parts.push(`</g>`);
  return parts;
}

/** Render a complete two-panel figure to an SVG string. */
export function renderFigure(data: FigureData,
                             opts: RenderOptions): string {
  const dump = canonicalJson({
    kind: data.kind,
    configHash: opts.configHash,
    experimentId: opts.experimentId,
    panels: data.panels.map((p) => ({
      metric: p.metric,
      xLabel: p.xLabel,
      series: p.series.map((s) => ({
        label: s.label,
        x: s.x,
        mean: s.mean,
        std: s.std,
      })),
    })),
  });

  const innerWidth = WIDTH - MARGIN.left - MARGIN.right - PANEL_GAP;
  const panelWidth = innerWidth / 2;
  const parts: string[] = [];
  parts.push(
    `<svg xmlns="http://www.w3.org/2000/svg" width="${WIDTH}" ` +
    `height="${HEIGHT}" viewBox="0 0 ${WIDTH} ${HEIGHT}" ` +
    `font-family="Helvetica, Arial, sans-serif">`);
  parts.push(`<title>${xmlEscape(opts.title)}</title>`);
  parts.push(`<metadata id="figure-data"><![CDATA[${dump}]]></metadata>`);
  parts.push(
    `<rect x="0" y="0" width="${WIDTH}" height="${HEIGHT}" fill="#ffffff"/>`);
  parts.push(
    `<text x="${px(WIDTH / 2)}" y="24" text-anchor="middle" ` +
    `font-size="15">${xmlEscape(opts.title)}</text>`);

  data.panels.forEach((panel, i) => {
    const x0 = MARGIN.left + i * (panelWidth + PANEL_GAP);
    parts.push(...renderPanel(panel, i, x0, x0 + panelWidth));
  });

  const caption = `${opts.experimentId} · ${data.kind} · ` +
    `config ${opts.configHash}`;
  parts.push(
    `<text id="caption" x="${px(WIDTH / 2)}" y="${px(HEIGHT - 10)}" ` +
    `text-anchor="middle" font-size="11" fill="#333">` +
    `${xmlEscape(caption)}</text>`);
  parts.push(`</svg>`);
  return parts.join("\n") + "\n";
}
