/** Shared fixtures: canned service payloads and a scriptable fetch. */

import { vi } from "vitest";

export const STATE_PAYLOAD = {
  trial_id: 1,
  source: "initial",
  started_at: "2026-01-01T00:00:00+00:00",
  theta: { alpha: 1.5, beta: -50.0, obs_variance: 10.0, gain_precision: 10.0 },
  posteriors: {
    alpha: { mean: 1.5, variance: 0.2 },
    beta: { mean: -50.0, variance: 100.0 },
    obs_variance: { mean: 10.0, variance: 10.0 },
    gain_precision: { mean: 10.0, variance: 10.0 },
  },
  db_size: 0,
  warning: null,
};

export const HISTORY_PAYLOAD = {
  trials: [
    {
      trial_id: 1,
      source: "initial",
      started_at: "2026-01-01T00:00:00+00:00",
      theta: STATE_PAYLOAD.theta,
    },
  ],
  appraisals: [],
  db_size: 0,
};

function curve(mean: number, variance: number) {
  const grid = Array.from({ length: 21 }, (_, i) => mean - 2 + (4 * i) / 20);
  const density = grid.map(
    (x) => Math.exp((-0.5 * (x - mean) ** 2) / variance) / Math.sqrt(2 * Math.PI * variance),
  );
  return { mean, variance, grid, density, prior_density: density.map((d) => d * 0.8) };
}

export const POSTERIOR_PAYLOAD = {
  parameters: {
    alpha: curve(1.5, 0.2),
    beta: curve(-50, 100),
    obs_variance: curve(10, 10),
    gain_precision: curve(10, 10),
  },
};

export function jsonResponse(body: unknown, status = 200): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "content-type": "application/json" },
  });
}

/** A fetch stub that routes by path suffix. Override entries per test. */
export function routedFetch(routes: Record<string, () => Response | Promise<Response>>) {
  return vi.fn(async (input: RequestInfo | URL) => {
    const url = String(input);
    for (const [suffix, handler] of Object.entries(routes)) {
      if (url.includes(suffix)) {
        return handler();
      }
    }
    return new Response("not found", { status: 404 });
  });
}

export function defaultRoutes() {
  return {
    "/api/state": () => jsonResponse(STATE_PAYLOAD),
    "/api/history": () => jsonResponse(HISTORY_PAYLOAD),
    "/api/posterior": () => jsonResponse(POSTERIOR_PAYLOAD),
  };
}

export async function until(check: () => boolean, timeoutMs = 10_000): Promise<void> {
  const start = Date.now();
  while (!check()) {
    if (Date.now() - start > timeoutMs) {
      throw new Error("condition not reached in time");
    }
    await new Promise((resolve) => setTimeout(resolve, 25));
  }
}
