/** Console state: one source of truth fed by polling, mutated only by
 * appraisals.
 *
 * Refreshes deduplicate in flight (a slow response never stacks up
 * behind the 1 Hz poll), and an appraisal keeps the controls disabled
 * until its follow-up refresh lands, mirroring the service's own
 * single-writer contract.
 */

import {
  ApiClient,
  HistoryPayload,
  PayloadFormatError,
  Polarity,
  PosteriorPayload,
  ServiceBusyError,
  ServiceState,
} from "./api.js";

export type ConnectionStatus = "connecting" | "online" | "offline";

export interface UiState {
  connection: ConnectionStatus;
  state: ServiceState | null;
  history: HistoryPayload | null;
  posterior: PosteriorPayload | null;
  appraisalInFlight: boolean;
  lastError: string | null;
}

type Listener = (ui: UiState) => void;

export class ConsoleStore {
  private ui: UiState = {
    connection: "connecting",
    state: null,
    history: null,
    posterior: null,
    appraisalInFlight: false,
    lastError: null,
  };

  private listeners: Listener[] = [];
  private refreshInFlight: Promise<void> | null = null;

  constructor(readonly api: ApiClient) {}

  snapshot(): UiState {
    return { ...this.ui };
  }

  subscribe(listener: Listener): () => void {
    this.listeners.push(listener);
    listener(this.snapshot());
    return () => {
      this.listeners = this.listeners.filter((l) => l !== listener);
    };
  }

  private emit(patch: Partial<UiState>): void {
    this.ui = { ...this.ui, ...patch };
    for (const listener of this.listeners) {
      listener(this.snapshot());
    }
  }

  /** Fetch state, history and posterior. Concurrent callers share one
   * round trip. */
  refresh(): Promise<void> {
    if (this.refreshInFlight) {
      return this.refreshInFlight;
    }
    this.refreshInFlight = this.doRefresh().finally(() => {
      this.refreshInFlight = null;
    });
    return this.refreshInFlight;
  }

  private async doRefresh(): Promise<void> {
    try {
      const [state, history, posterior] = await Promise.all([
        this.api.state(),
        this.api.history(),
        this.api.posterior(),
      ]);
      this.emit({ connection: "online", state, history, posterior, lastError: null });
    } catch (err) {
      if (err instanceof PayloadFormatError) {
        // the service answered with something unusable: keep the last
        // good data on screen and surface the problem
        this.emit({ connection: "online", lastError: err.message });
      } else {
        this.emit({ connection: "offline", lastError: String(err) });
      }
    }
  }

  get controlsEnabled(): boolean {
    return (
      this.ui.connection === "online" &&
      this.ui.state !== null &&
      !this.ui.appraisalInFlight
    );
  }

  /** Submit one appraisal and refresh before re-enabling the controls. */
  async submitAppraisal(polarity: Polarity): Promise<void> {
    if (!this.controlsEnabled) {
      return;
    }
    this.emit({ appraisalInFlight: true, lastError: null });
    try {
      await this.api.appraise(polarity);
      await this.doRefresh();
    } catch (err) {
      if (err instanceof ServiceBusyError) {
        this.emit({ lastError: "the service is still processing the previous appraisal" });
      } else {
        this.emit({ connection: "offline", lastError: String(err) });
      }
    } finally {
      this.emit({ appraisalInFlight: false });
    }
  }
}

/** Poll at a fixed cadence; trial turnover is human speed, one hertz is
 * plenty. Returns a stop function. */
export function startPolling(store: ConsoleStore, intervalMs = 1000): () => void {
  void store.refresh();
  const handle = setInterval(() => {
    void store.refresh();
  }, intervalMs);
  return () => clearInterval(handle);
}
