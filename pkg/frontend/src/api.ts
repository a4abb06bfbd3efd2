/** Typed client for the personalization loop service.
 *
 * The console performs no inference of its own: every number shown comes
 * from these endpoints. Payloads are validated just enough to fail loudly
 * on malformed responses instead of rendering garbage.
 */

export interface ThetaValues {
  alpha: number;
  beta: number;
  obs_variance: number;
  gain_precision: number;
}

export interface Moments {
  mean: number | null;
  variance: number | null;
}

export interface ServiceState {
  trial_id: number;
  source: string;
  started_at: string;
  theta: ThetaValues;
  posteriors: Record<string, Moments>;
  db_size: number;
  warning: string | null;
}

export interface TrialRecord {
  trial_id: number;
  source: string;
  started_at: string;
  theta: ThetaValues;
}

export interface AppraisalRecord {
  polarity: "pos" | "neg";
  t: string;
}

export interface HistoryPayload {
  trials: TrialRecord[];
  appraisals: AppraisalRecord[];
  db_size: number;
}

export interface PosteriorCurve {
  mean: number | null;
  variance: number | null;
  grid: number[];
  density: number[];
  prior_density: number[];
}

export interface PosteriorPayload {
  parameters: Record<string, PosteriorCurve>;
}

export type Polarity = "pos" | "neg";

export class PayloadFormatError extends Error {}

export class ServiceBusyError extends Error {}

function assertNumber(value: unknown, label: string): number {
  if (typeof value !== "number" || Number.isNaN(value)) {
    throw new PayloadFormatError(`${label} is not a number: ${String(value)}`);
  }
  return value;
}

function validateState(body: unknown): ServiceState {
  const obj = body as Partial<ServiceState> | null;
  if (!obj || typeof obj !== "object") {
    throw new PayloadFormatError("state payload is not an object");
  }
  assertNumber(obj.trial_id, "trial_id");
  if (!obj.theta || typeof obj.theta !== "object") {
    throw new PayloadFormatError("state payload has no theta");
  }
  assertNumber((obj.theta as ThetaValues).alpha, "theta.alpha");
  return obj as ServiceState;
}

function validateHistory(body: unknown): HistoryPayload {
  const obj = body as Partial<HistoryPayload> | null;
  if (!obj || !Array.isArray(obj.trials) || !Array.isArray(obj.appraisals)) {
    throw new PayloadFormatError("history payload is malformed");
  }
  return obj as HistoryPayload;
}

function validatePosterior(body: unknown): PosteriorPayload {
  const obj = body as Partial<PosteriorPayload> | null;
  if (!obj || !obj.parameters || typeof obj.parameters !== "object") {
    throw new PayloadFormatError("posterior payload is malformed");
  }
  for (const [name, curve] of Object.entries(obj.parameters)) {
    if (!Array.isArray(curve.grid) || !Array.isArray(curve.density)) {
      throw new PayloadFormatError(`posterior curve for ${name} is malformed`);
    }
  }
  return obj as PosteriorPayload;
}

export class ApiClient {
  constructor(readonly baseUrl: string) {}

  private url(path: string): string {
    return `${this.baseUrl.replace(/\/$/, "")}${path}`;
  }

  private async getJson(path: string): Promise<unknown> {
    const response = await fetch(this.url(path));
    if (!response.ok) {
      throw new Error(`GET ${path} failed with ${response.status}`);
    }
    return response.json();
  }

  async state(): Promise<ServiceState> {
    return validateState(await this.getJson("/api/state"));
  }

  async history(): Promise<HistoryPayload> {
    return validateHistory(await this.getJson("/api/history"));
  }

  async posterior(): Promise<PosteriorPayload> {
    return validatePosterior(await this.getJson("/api/posterior"));
  }

  /** Submit one appraisal. 409 (another appraisal mid-flight) surfaces as
   * ServiceBusyError so the caller can retry without treating it as an
   * outage. */
  async appraise(polarity: Polarity): Promise<ServiceState> {
    const response = await fetch(this.url("/api/appraisal"), {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ polarity }),
    });
    if (response.status === 409) {
      throw new ServiceBusyError("an appraisal is already being processed");
    }
    if (!response.ok) {
      throw new Error(`appraisal rejected with ${response.status}`);
    }
    return validateState(await response.json());
  }

  currentAudioUrl(trialId: number): string {
    // the trial id busts stale browser caches across trials
    return this.url(`/api/audio/current?trial=${trialId}`);
  }

  originalAudioUrl(): string {
    return this.url("/api/audio/original");
  }
}
