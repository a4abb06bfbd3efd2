/** DOM rendering for the console panels. All views are plain functions of
 * the store snapshot; no view computes anything the service did not send.
 */

import { PosteriorCurve } from "./api.js";
import { renderDensityChart } from "./chart.js";
import { UiState } from "./store.js";

const THETA_LABELS: Record<string, string> = {
  alpha: "slope",
  beta: "offset (dB)",
  obs_variance: "observation variance",
  gain_precision: "gain precision",
};

const PARAM_ORDER = ["alpha", "beta", "obs_variance", "gain_precision"];

function fmt(value: number | null | undefined, digits = 4): string {
  if (value === null || value === undefined || Number.isNaN(value)) {
    return "-";
  }
  return value.toPrecision(digits);
}

export function renderBanner(el: HTMLElement, ui: UiState): void {
  if (ui.connection === "offline") {
    el.innerHTML = `<div class="banner offline" data-testid="offline-banner">
      service unreachable, retrying &hellip;</div>`;
    return;
  }
  if (ui.lastError) {
    el.innerHTML = `<div class="banner toast" data-testid="error-toast">${ui.lastError}</div>`;
    return;
  }
  if (ui.state?.warning) {
    el.innerHTML = `<div class="banner toast" data-testid="warning-toast">${ui.state.warning}</div>`;
    return;
  }
  el.innerHTML = "";
}

export interface TrialHandlers {
  onAppraise: (polarity: "pos" | "neg") => void;
  onToggleAb: () => void;
}

export function renderTrialPanel(el: HTMLElement, ui: UiState, handlers: TrialHandlers): void {
  const state = ui.state;
  const disabled = ui.connection !== "online" || ui.appraisalInFlight || !state;
  if (!state) {
    el.innerHTML = `<p class="placeholder">waiting for the service&hellip;</p>`;
    return;
  }
  const rows = Object.entries(state.theta)
    .map(
      ([key, value]) =>
        `<tr><td>${THETA_LABELS[key] ?? key}</td>
         <td data-testid="theta-${key}">${fmt(value as number)}</td></tr>`,
    )
    .join("");
  el.innerHTML = `
    <div class="trial-head">
      <span data-testid="trial-id">trial ${state.trial_id}</span>
      <span class="source" data-testid="trial-source">${state.source}</span>
    </div>
    <table class="theta">${rows}</table>
    <div class="ab-row">
      <button data-testid="ab-toggle" ${disabled ? "disabled" : ""}>A / B</button>
      <span data-testid="ab-active"></span>
    </div>
    <div class="appraise-row">
      <button class="up" data-testid="appraise-pos" ${disabled ? "disabled" : ""}>
        sounds good</button>
      <button class="down" data-testid="appraise-neg" ${disabled ? "disabled" : ""}>
        try another</button>
    </div>
    <p class="hint" data-testid="db-size">preferred examples banked: ${state.db_size}</p>
  `;
  el.querySelector<HTMLButtonElement>('[data-testid="appraise-pos"]')
    ?.addEventListener("click", () => handlers.onAppraise("pos"));
  el.querySelector<HTMLButtonElement>('[data-testid="appraise-neg"]')
    ?.addEventListener("click", () => handlers.onAppraise("neg"));
  el.querySelector<HTMLButtonElement>('[data-testid="ab-toggle"]')
    ?.addEventListener("click", () => handlers.onToggleAb());
}

export function renderPosteriorPanel(el: HTMLElement, ui: UiState): void {
  const parameters = ui.posterior?.parameters ?? null;
  for (const name of PARAM_ORDER) {
    let cell = el.querySelector<HTMLElement>(`[data-param="${name}"]`);
    if (!cell) {
      cell = document.createElement("div");
      cell.dataset.param = name;
      cell.className = "posterior-cell";
      cell.innerHTML = `
        <h3>${THETA_LABELS[name] ?? name}</h3>
        <canvas width="260" height="120" data-testid="chart-${name}"></canvas>
        <p class="moments" data-testid="moments-${name}"></p>`;
      el.appendChild(cell);
    }
    const canvas = cell.querySelector<HTMLCanvasElement>("canvas");
    const moments = cell.querySelector<HTMLElement>(".moments");
    const curve: PosteriorCurve | null = parameters?.[name] ?? null;
    if (canvas) {
      renderDensityChart(canvas, curve);
    }
    if (moments) {
      moments.textContent = curve
        ? `mean ${fmt(curve.mean)}  variance ${fmt(curve.variance)}`
        : "no data";
    }
  }
}

export function renderHistory(el: HTMLElement, ui: UiState): void {
  const history = ui.history;
  if (!history) {
    el.innerHTML = `<p class="placeholder">no history yet</p>`;
    return;
  }
  const items = [...history.trials]
    .reverse()
    .slice(0, 12)
    .map(
      (trial) => `
      <li>
        <span class="tid">#${trial.trial_id}</span>
        <span class="src">${trial.source}</span>
        <span class="vals">slope ${fmt(trial.theta.alpha, 3)}, offset ${fmt(trial.theta.beta, 4)}</span>
      </li>`,
    )
    .join("");
  el.innerHTML = `
    <p data-testid="history-counts">
      ${history.trials.length} trials, ${history.appraisals.length} appraisals,
      ${history.db_size} preferred examples</p>
    <ul class="history-list">${items}</ul>`;
}
