/**
 * Minimal dependency-free SVG line chart: every metric series is drawn as a
 * polyline of a distinct color on one shared coordinate system.
 */

import type { MonitorModel } from "../state/monitor.js";

const SERIES_COLORS = [
  "#1f77b4",
  "#ff7f0e",
  "#2ca02c",
  "#d62728",
  "#9467bd",
  "#8c564b",
  "#e377c2",
  "#7f7f7f",
];

const WIDTH = 640;
const HEIGHT = 280;
const PAD = 36;

export function renderChart(model: MonitorModel): string {
  const domain = model.stepDomain();
  if (domain === null) {
    return `<svg width="${WIDTH}" height="${HEIGHT}"><text x="20" y="40">waiting for metric events…</text></svg>`;
  }
  const [minStep, maxStep] = domain;
  let minValue = Infinity;
  let maxValue = -Infinity;
  for (const points of model.series.values()) {
    for (const point of points) {
      minValue = Math.min(minValue, point.value);
      maxValue = Math.max(maxValue, point.value);
    }
  }
  if (minValue === maxValue) {
    minValue -= 0.5;
    maxValue += 0.5;
  }
  const sx = (step: number) =>
    maxStep === minStep
      ? WIDTH / 2
      : PAD + ((step - minStep) / (maxStep - minStep)) * (WIDTH - 2 * PAD);
  const sy = (value: number) =>
    HEIGHT - PAD - ((value - minValue) / (maxValue - minValue)) * (HEIGHT - 2 * PAD);

  const parts: string[] = [
    `<svg width="${WIDTH}" height="${HEIGHT}" role="img">`,
    `<rect width="${WIDTH}" height="${HEIGHT}" fill="#fafafa"/>`,
  ];
  let index = 0;
  for (const [name, points] of model.series) {
    const color = SERIES_COLORS[index % SERIES_COLORS.length];
    const path = points
      .map((p) => `${sx(p.step).toFixed(1)},${sy(p.value).toFixed(1)}`)
      .join(" ");
    parts.push(
      `<polyline fill="none" stroke="${color}" stroke-width="2" points="${path}"/>`,
    );
    parts.push(
      `<text x="${PAD}" y="${16 + 14 * index}" fill="${color}" font-size="12">${name}</text>`,
    );
    index += 1;
  }
  parts.push("</svg>");
  return parts.join("");
}
