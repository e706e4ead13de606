import { SessionState, TrajectoryDoc } from "../src/api.js";

export function fakeState(overrides: Partial<SessionState> = {}): SessionState {
  return {
    id: "abc123",
    status: "RUNNING",
    clock: 0,
    stocks: {
      Cash: 1_500_000,
      LegacyMachines: 45,
      I40Idle: 2,
      I40InUse: 2,
      LegacyStaff: 90,
      I40Staff: 10,
    },
    net_cash_flow: 1000,
    blended_unit_cost: 220,
    i40_share: 0.1,
    time: { start: 0, stop: 60, dt: 0.0625 },
    decision_bounds: {
      acquisition_rate: [0, 10],
      hire_rate: [0, 20],
      dismiss_rate: [0, 20],
    },
    events: [],
    ...overrides,
  };
}

export function fakeTrajectory(overrides: Partial<TrajectoryDoc> = {}): TrajectoryDoc {
  return {
    times: [0, 1, 2],
    series: {
      Cash: [1_500_000, 1_550_000, 1_600_000],
      LegacyStaff: [90, 88, 86],
      I40Staff: [10, 11, 12],
      sales: [4500, 4500, 4500],
      production_cost: [380_000, 375_000, 370_000],
      payroll: [630_000, 630_000, 630_000],
    },
    events: [],
    metadata: {},
    ...overrides,
  };
}

type Responder = (url: string, init?: RequestInit) => { status: number; body: unknown } | undefined;

/** fetch stub driven by an ordered list of responders; each call consumes
 * the first responder that returns a value. */
export function mockFetch(responder: Responder): typeof fetch {
  return (async (input: RequestInfo | URL, init?: RequestInit) => {
    const url = String(input);
    const out = responder(url, init);
    if (!out) throw new Error(`unexpected fetch ${url}`);
    return new Response(JSON.stringify(out.body), {
      status: out.status,
      headers: { "content-type": "application/json" },
    });
  }) as typeof fetch;
}
