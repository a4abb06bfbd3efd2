import { afterEach, describe, expect, it, vi } from "vitest";

import { ApiClient } from "../src/api.js";
import { ConsoleStore } from "../src/store.js";
import {
  defaultRoutes,
  HISTORY_PAYLOAD,
  jsonResponse,
  routedFetch,
  STATE_PAYLOAD,
} from "./helpers.js";

const BASE = "http://127.0.0.1:9999";

function makeStore() {
  return new ConsoleStore(new ApiClient(BASE));
}

afterEach(() => {
  vi.unstubAllGlobals();
});

describe("ConsoleStore", () => {
  it("goes online after a successful refresh", async () => {
    vi.stubGlobal("fetch", routedFetch(defaultRoutes()));
    const store = makeStore();
    await store.refresh();
    const ui = store.snapshot();
    expect(ui.connection).toBe("online");
    expect(ui.state?.trial_id).toBe(1);
    expect(ui.history?.trials).toHaveLength(1);
    expect(store.controlsEnabled).toBe(true);
  });

  it("deduplicates refreshes in flight", async () => {
    let resolveState: (r: Response) => void = () => {};
    const gate = new Promise<Response>((resolve) => {
      resolveState = resolve;
    });
    const routes = defaultRoutes();
    const fetchMock = routedFetch({ ...routes, "/api/state": () => gate });
    vi.stubGlobal("fetch", fetchMock);
    const store = makeStore();
    const first = store.refresh();
    const second = store.refresh();
    expect(second).toBe(first);
    resolveState(jsonResponse(STATE_PAYLOAD));
    await first;
    const stateCalls = fetchMock.mock.calls.filter(([u]) => String(u).includes("/api/state"));
    expect(stateCalls).toHaveLength(1);
  });

  it("marks the connection offline when the service is unreachable", async () => {
    vi.stubGlobal(
      "fetch",
      vi.fn(async () => {
        throw new TypeError("connect ECONNREFUSED");
      }),
    );
    const store = makeStore();
    await store.refresh();
    expect(store.snapshot().connection).toBe("offline");
    expect(store.controlsEnabled).toBe(false);
  });

  it("keeps the last good data and surfaces malformed payloads", async () => {
    vi.stubGlobal("fetch", routedFetch(defaultRoutes()));
    const store = makeStore();
    await store.refresh();
    vi.stubGlobal(
      "fetch",
      routedFetch({
        ...defaultRoutes(),
        "/api/posterior": () => jsonResponse({ oops: 1 }),
      }),
    );
    await store.refresh();
    const ui = store.snapshot();
    expect(ui.connection).toBe("online");
    expect(ui.lastError).toMatch(/malformed/);
    expect(ui.state?.trial_id).toBe(1); // previous data kept
  });

  it("disables controls for the whole appraisal round trip", async () => {
    let resolveAppraisal: (r: Response) => void = () => {};
    const gate = new Promise<Response>((resolve) => {
      resolveAppraisal = resolve;
    });
    // the service advances the trial once the appraisal lands; the store
    // must pick that up through its follow-up refresh
    let trialId = 1;
    vi.stubGlobal(
      "fetch",
      routedFetch({
        ...defaultRoutes(),
        "/api/state": () => jsonResponse({ ...STATE_PAYLOAD, trial_id: trialId }),
        "/api/appraisal": () => {
          trialId = 2;
          return gate;
        },
      }),
    );
    const store = makeStore();
    await store.refresh();
    const flights: boolean[] = [];
    store.subscribe((ui) => flights.push(ui.appraisalInFlight));

    const submission = store.submitAppraisal("neg");
    expect(store.snapshot().appraisalInFlight).toBe(true);
    expect(store.controlsEnabled).toBe(false);
    resolveAppraisal(jsonResponse({ ...STATE_PAYLOAD, trial_id: 2 }));
    await submission;
    expect(store.snapshot().appraisalInFlight).toBe(false);
    expect(store.controlsEnabled).toBe(true);
    expect(store.snapshot().state?.trial_id).toBe(2);
    expect(flights).toContain(true);
  });

  it("treats 409 as a retryable notice, not an outage", async () => {
    vi.stubGlobal(
      "fetch",
      routedFetch({
        ...defaultRoutes(),
        "/api/appraisal": () => jsonResponse({ error: "busy" }, 409),
      }),
    );
    const store = makeStore();
    await store.refresh();
    await store.submitAppraisal("pos");
    const ui = store.snapshot();
    expect(ui.connection).toBe("online");
    expect(ui.lastError).toMatch(/previous appraisal/);
  });

  it("ignores submissions while controls are disabled", async () => {
    const fetchMock = routedFetch(defaultRoutes());
    vi.stubGlobal("fetch", fetchMock);
    const store = makeStore();
    await store.submitAppraisal("pos"); // nothing fetched: store not online yet
    const appraisalCalls = fetchMock.mock.calls.filter(([u]) =>
      String(u).includes("/api/appraisal"),
    );
    expect(appraisalCalls).toHaveLength(0);
  });
});
