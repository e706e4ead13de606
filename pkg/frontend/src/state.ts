/** Client-side run model: one live session plus saved runs for comparison.
 *
 * Chart series are verbatim server data; the only client-side processing
 * is visual downsampling by index (values are never recomputed).
 */

import { ApiError, Decision, SessionApi, SessionState, TrajectoryDoc } from "./api.js";

export interface PendingDecision {
  acquisition_rate: number;
  hire_rate: number;
  dismiss_rate: number;
  duration: number;
}

export interface SavedRun {
  label: string;
  trajectory: TrajectoryDoc;
  time: { start: number; stop: number; dt: number };
  terminalCash: number;
  crossoverTime: number | null;
  bankruptcyTime: number | null;
}

export interface RunDeltas {
  label: string;
  terminalCash: number;
  crossoverTime: number | null; // null when either run lacks a crossover
}

export interface ClientRunView {
  state: SessionState | null;
  trajectory: TrajectoryDoc | null;
  pending: PendingDecision;
  comparisons: SavedRun[];
  stepInFlight: boolean;
  error: string | null;
  notice: string | null;
}

export function emptyView(): ClientRunView {
  return {
    state: null,
    trajectory: null,
    pending: { acquisition_rate: 0.5, hire_rate: 1, dismiss_rate: 2, duration: 1 },
    comparisons: [],
    stepInFlight: false,
    error: null,
    notice: null,
  };
}

export function leversEnabled(view: ClientRunView): boolean {
  return view.state?.status === "RUNNING" && !view.stepInFlight;
}

export function clampToBounds(view: ClientRunView, pending: PendingDecision): PendingDecision {
  const bounds = view.state?.decision_bounds;
  if (!bounds) return pending;
  const clamp = (name: keyof PendingDecision): number => {
    const b = bounds[name as string];
    if (!b) return pending[name];
    return Math.min(Math.max(pending[name], b[0]), b[1]);
  };
  return {
    acquisition_rate: clamp("acquisition_rate"),
    hire_rate: clamp("hire_rate"),
    dismiss_rate: clamp("dismiss_rate"),
    duration: pending.duration,
  };
}

export async function startRun(
  api: SessionApi,
  view: ClientRunView,
  overrides: Record<string, number> = {},
  seed?: number,
): Promise<ClientRunView> {
  const state = await api.createSession(overrides, seed);
  const trajectory = await api.trajectory(state.id);
  return { ...view, state, trajectory, error: null, notice: null };
}

/** Issue one protocol step. Retries once on 409 CONFLICT; surfaces 422
 * messages verbatim; never sends a request when the session is not
 * RUNNING. */
export async function submitStep(
  api: SessionApi,
  view: ClientRunView,
): Promise<ClientRunView> {
  if (!view.state || view.state.status !== "RUNNING" || view.stepInFlight) {
    return view; // levers are locked; no request
  }
  const decision: Decision = {
    period_start: view.state.clock,
    duration: view.pending.duration,
    acquisition_rate: view.pending.acquisition_rate,
    hire_rate: view.pending.hire_rate,
    dismiss_rate: view.pending.dismiss_rate,
  };
  const attempt = async () => api.step(view.state!.id, decision);
  try {
    let response;
    try {
      response = await attempt();
    } catch (e) {
      if (e instanceof ApiError && e.status === 409 && e.code === "CONFLICT") {
        response = await attempt(); // one retry on lock contention
      } else {
        throw e;
      }
    }
    const trajectory = await api.trajectory(response.state.id);
    return {
      ...view,
      state: response.state,
      trajectory,
      stepInFlight: false,
      error: null,
    };
  } catch (e) {
    if (e instanceof ApiError) {
      return { ...view, stepInFlight: false, error: e.message };
    }
    throw e;
  }
}

export function bankruptcyBanner(view: ClientRunView): string | null {
  if (view.state?.status !== "BANKRUPT") return null;
  const ev = view.state.events.find((e) => e.name === "BANKRUPTCY");
  return ev ? `Bankrupt at month ${ev.time}` : "Bankrupt";
}

function eventTime(t: TrajectoryDoc, name: string): number | null {
  const ev = t.events.find((e) => e.name === name);
  return ev ? ev.time : null;
}

export function saveRun(view: ClientRunView, label: string): SavedRun {
  if (!view.state || !view.trajectory) throw new Error("no run to save");
  const cash = view.trajectory.series["Cash"];
  return {
    label,
    trajectory: view.trajectory,
    time: view.state.time,
    terminalCash: cash[cash.length - 1],
    crossoverTime: eventTime(view.trajectory, "CROSSOVER"),
    bankruptcyTime: eventTime(view.trajectory, "BANKRUPTCY"),
  };
}

/** Add a saved run to the comparison set; refuses runs on a different
 * time base. */
export function addComparison(view: ClientRunView, run: SavedRun): ClientRunView {
  const time = view.state?.time;
  if (
    time &&
    (run.time.start !== time.start || run.time.stop !== time.stop || run.time.dt !== time.dt)
  ) {
    return { ...view, notice: "TIMEBASE_MISMATCH: saved run uses a different time grid" };
  }
  return { ...view, comparisons: [...view.comparisons, run], notice: null };
}

/** Terminal-cash and crossover-time differences of each saved run against
 * the current one. */
export function comparisonDeltas(view: ClientRunView): RunDeltas[] {
  if (!view.trajectory) return [];
  const current = saveRun(view, "current");
  return view.comparisons.map((run) => ({
    label: run.label,
    terminalCash: run.terminalCash - current.terminalCash,
    crossoverTime:
      run.crossoverTime !== null && current.crossoverTime !== null
        ? run.crossoverTime - current.crossoverTime
        : null,
  }));
}
