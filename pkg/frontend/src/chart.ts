/** Density chart: posterior curve with the prior overlaid for contrast.
 *
 * Pure canvas drawing; when a 2d context is unavailable (headless test
 * environments) the drawing is skipped but the revision bookkeeping still
 * advances, so observers can assert that new data arrived.
 */

import { PosteriorCurve } from "./api.js";

const POSTERIOR_STROKE = "#2563eb";
const PRIOR_STROKE = "#9ca3af";

function context2d(canvas: HTMLCanvasElement): CanvasRenderingContext2D | null {
  // headless DOMs ship canvas elements without a drawing backend
  if (typeof globalThis.CanvasRenderingContext2D === "undefined") {
    return null;
  }
  return canvas.getContext("2d");
}

export function renderDensityChart(
  canvas: HTMLCanvasElement,
  curve: PosteriorCurve | null,
): void {
  const revision = Number(canvas.dataset.revision ?? "0") + 1;
  canvas.dataset.revision = String(revision);

  if (!curve || curve.grid.length === 0 || curve.density.length === 0) {
    canvas.dataset.empty = "true";
    const ctx = context2d(canvas);
    if (ctx) {
      ctx.clearRect(0, 0, canvas.width, canvas.height);
      ctx.fillStyle = "#6b7280";
      ctx.font = "12px sans-serif";
      ctx.fillText("no posterior yet", 10, canvas.height / 2);
    }
    return;
  }
  canvas.dataset.empty = "false";

  const ctx = context2d(canvas);
  if (!ctx) {
    return;
  }

  const { grid, density, prior_density: prior } = curve;
  const xMin = grid[0] ?? 0;
  const xMax = grid[grid.length - 1] ?? 1;
  const yMax = Math.max(...density, ...(prior.length ? prior : [0]), 1e-12);
  const w = canvas.width;
  const h = canvas.height;
  const pad = 8;

  const toX = (x: number) => pad + ((x - xMin) / (xMax - xMin || 1)) * (w - 2 * pad);
  const toY = (y: number) => h - pad - (y / yMax) * (h - 2 * pad);

  ctx.clearRect(0, 0, w, h);

  const trace = (values: number[], stroke: string, width: number) => {
    if (values.length !== grid.length) {
      return;
    }
    ctx.beginPath();
    values.forEach((v, i) => {
      const gx = grid[i] ?? 0;
      if (i === 0) {
        ctx.moveTo(toX(gx), toY(v));
      } else {
        ctx.lineTo(toX(gx), toY(v));
      }
    });
    ctx.strokeStyle = stroke;
    ctx.lineWidth = width;
    ctx.stroke();
  };

  trace(prior, PRIOR_STROKE, 1);
  trace(density, POSTERIOR_STROKE, 2);

  // baseline
  ctx.strokeStyle = "rgba(0, 0, 0, 0.2)";
  ctx.lineWidth = 1;
  ctx.beginPath();
  ctx.moveTo(pad, h - pad);
  ctx.lineTo(w - pad, h - pad);
  ctx.stroke();
}
