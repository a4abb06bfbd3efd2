/** Console bootstrap: build the scaffold, wire the store, poll at 1 Hz. */

import { ApiClient } from "./api.js";
import { AbPlayer } from "./audio.js";
import { ConsoleStore, startPolling } from "./store.js";
import { renderBanner, renderHistory, renderPosteriorPanel, renderTrialPanel } from "./views.js";

function apiBase(): string {
  const override = new URLSearchParams(window.location.search).get("api");
  if (override) {
    return override;
  }
  return `http://${window.location.hostname || "127.0.0.1"}:8347`;
}

export function mountConsole(root: HTMLElement, api: ApiClient): ConsoleStore {
  root.innerHTML = `
    <header><h1>hearing aid appraisal console</h1></header>
    <div id="banner"></div>
    <main>
      <section id="trial" class="panel"><h2>current trial</h2><div id="trial-body"></div></section>
      <section id="posterior" class="panel"><h2>parameter beliefs</h2><div id="posterior-body"></div></section>
      <section id="history" class="panel"><h2>history</h2><div id="history-body"></div></section>
    </main>
    <audio id="audio-original"></audio>
    <audio id="audio-processed"></audio>
  `;
  const banner = root.querySelector<HTMLElement>("#banner")!;
  const trialBody = root.querySelector<HTMLElement>("#trial-body")!;
  const posteriorBody = root.querySelector<HTMLElement>("#posterior-body")!;
  const historyBody = root.querySelector<HTMLElement>("#history-body")!;
  const player = new AbPlayer(
    root.querySelector<HTMLAudioElement>("#audio-original")!,
    root.querySelector<HTMLAudioElement>("#audio-processed")!,
  );

  const store = new ConsoleStore(api);

  const handlers = {
    onAppraise: (polarity: "pos" | "neg") => {
      void store.submitAppraisal(polarity);
    },
    onToggleAb: () => {
      const active = player.toggle();
      const label = root.querySelector<HTMLElement>('[data-testid="ab-active"]');
      if (label) {
        label.textContent = active === "processed" ? "hearing: processed" : "hearing: original";
      }
      player.play();
    },
  };

  let lastTrialId: number | null = null;
  store.subscribe((ui) => {
    renderBanner(banner, ui);
    renderTrialPanel(trialBody, ui, handlers);
    renderPosteriorPanel(posteriorBody, ui);
    renderHistory(historyBody, ui);
    if (ui.state && ui.state.trial_id !== lastTrialId) {
      lastTrialId = ui.state.trial_id;
      player.setSources(api.originalAudioUrl(), api.currentAudioUrl(ui.state.trial_id));
    }
  });
  return store;
}

declare global {
  interface Window {
    __consoleStore?: ConsoleStore;
  }
}

if (typeof document !== "undefined" && document.getElementById("app")) {
  const api = new ApiClient(apiBase());
  const store = mountConsole(document.getElementById("app")!, api);
  startPolling(store, 1000);
  window.__consoleStore = store;
}
