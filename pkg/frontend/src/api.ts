/** Typed client for the flight-simulator session protocol.
 *
 * Every number displayed in the UI originates from these responses; the
 * client performs no model arithmetic.
 */

export interface SessionState {
  id: string;
  status: "RUNNING" | "BANKRUPT" | "COMPLETED" | "ENDED";
  clock: number;
  stocks: Record<string, number>;
  net_cash_flow: number | null;
  blended_unit_cost: number | null;
  i40_share: number;
  time: { start: number; stop: number; dt: number };
  decision_bounds: Record<string, [number, number]>;
  events: { name: string; time: number }[];
}

export interface Decision {
  period_start: number;
  duration: number;
  acquisition_rate: number;
  hire_rate: number;
  dismiss_rate: number;
}

export interface StepKpis {
  cash_delta: number;
  net_cash_flow: number;
  blended_unit_cost: number | null;
  i40_share: number;
  events_this_period: { name: string; time: number }[];
}

export interface StepResponse {
  state: SessionState;
  kpis: StepKpis;
}

export interface TrajectoryDoc {
  times: number[];
  series: Record<string, number[]>;
  events: { name: string; time: number }[];
  metadata: { decisions?: Decision[] } & Record<string, unknown>;
}

export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
  ) {
    super(message);
  }
}

async function parseError(res: Response): Promise<ApiError> {
  let code = "UNKNOWN";
  let message = res.statusText;
  try {
    const body = await res.json();
    const detail = body.detail ?? body;
    if (typeof detail === "object" && detail !== null) {
      code = detail.code ?? code;
      message = detail.message ?? JSON.stringify(detail);
    } else if (typeof detail === "string") {
      message = detail;
    }
  } catch {
    /* non-JSON error body; keep statusText */
  }
  return new ApiError(res.status, code, message);
}

export class SessionApi {
  constructor(
    private baseUrl: string = "http://127.0.0.1:4640",
    private fetchFn: typeof fetch = fetch,
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const res = await this.fetchFn(`${this.baseUrl}${path}`, {
      headers: { "content-type": "application/json" },
      ...init,
    });
    if (!res.ok) throw await parseError(res);
    return (await res.json()) as T;
  }

  createSession(overrides: Record<string, number> = {}, seed?: number): Promise<SessionState> {
    return this.request("/sessions", {
      method: "POST",
      body: JSON.stringify(seed === undefined ? { overrides } : { overrides, seed }),
    });
  }

  getSession(id: string): Promise<SessionState> {
    return this.request(`/sessions/${id}`);
  }

  step(id: string, decision: Decision): Promise<StepResponse> {
    return this.request(`/sessions/${id}/step`, {
      method: "POST",
      body: JSON.stringify(decision),
    });
  }

  trajectory(id: string): Promise<TrajectoryDoc> {
    return this.request(`/sessions/${id}/trajectory`);
  }

  kpis(id: string): Promise<Record<string, unknown>> {
    return this.request(`/sessions/${id}/kpis`);
  }

  deleteSession(id: string): Promise<{ id: string; status: string }> {
    return this.request(`/sessions/${id}`, { method: "DELETE" });
  }
}
