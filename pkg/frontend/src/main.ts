/** Flight-deck DOM wiring: levers, step control, charts, comparisons. */

import { SessionApi } from "./api.js";
import {
  cashChart,
  renderSvg,
  staffChart,
  unitCostChart,
} from "./charts.js";
import {
  ClientRunView,
  SavedRun,
  addComparison,
  bankruptcyBanner,
  clampToBounds,
  comparisonDeltas,
  emptyView,
  leversEnabled,
  saveRun,
  startRun,
  submitStep,
} from "./state.js";

const CHART = { width: 640, height: 220 };
const OVERLAY_COLORS = ["#1b7a3d", "#8d5bd4", "#d88a2b", "#4b8b9b"];

const api = new SessionApi(
  new URLSearchParams(location.search).get("server") ?? "http://127.0.0.1:4640",
);
let view: ClientRunView = emptyView();

function $(id: string): HTMLElement {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el;
}

const LEVERS = ["acquisition_rate", "hire_rate", "dismiss_rate"] as const;

function render(): void {
  const state = view.state;
  const banner = $("banner");
  const bankrupt = bankruptcyBanner(view);
  banner.textContent = bankrupt ?? "";
  banner.classList.toggle("visible", bankrupt !== null);

  $("status").textContent = state
    ? `${state.status} — month ${state.clock.toFixed(2)} of ${state.time.stop}`
    : "no session";
  $("kpis").textContent = state
    ? [
        `cash ${fmt(state.stocks["Cash"])}`,
        `staff ${state.stocks["LegacyStaff"].toFixed(1)} legacy / ${state.stocks["I40Staff"].toFixed(1)} i4.0`,
        `unit cost ${state.blended_unit_cost === null ? "—" : state.blended_unit_cost.toFixed(1)}`,
        `i4.0 share ${(state.i40_share * 100).toFixed(1)}%`,
      ].join("  ·  ")
    : "";

  const enabled = leversEnabled(view);
  for (const lever of LEVERS) {
    const input = $(lever) as HTMLInputElement;
    input.disabled = !enabled;
    if (state) {
      const [lo, hi] = state.decision_bounds[lever];
      input.min = String(lo);
      input.max = String(hi);
    }
    input.value = String(view.pending[lever]);
    $(`${lever}-value`).textContent = Number(view.pending[lever]).toFixed(2);
  }
  ($("duration") as HTMLInputElement).disabled = !enabled;
  ($("step") as HTMLButtonElement).disabled = !enabled;
  ($("save-run") as HTMLButtonElement).disabled = view.trajectory === null;

  $("error").textContent = view.error ?? "";
  $("notice").textContent = view.notice ?? "";

  renderCharts();
  renderDeltas();
}

function fmt(v: number): string {
  return v.toLocaleString("en-US", { maximumFractionDigits: 0 });
}

function renderCharts(): void {
  const t = view.trajectory;
  if (!t) return;
  $("staff-chart").innerHTML = renderSvg(
    staffChart(t.times, t.series["LegacyStaff"], t.series["I40Staff"], CHART),
    CHART,
  );
  const blended = t.series["sales"].map((s, i) =>
    s === 0 ? null : (t.series["production_cost"][i] + t.series["payroll"][i]) / s,
  );
  $("cost-chart").innerHTML = renderSvg(unitCostChart(t.times, blended, CHART), CHART);

  const overlays = [
    {
      label: "current",
      cash: t.series["Cash"],
      bankruptcyTime: t.events.find((e) => e.name === "BANKRUPTCY")?.time ?? null,
      color: "#14425c",
    },
    ...view.comparisons.map((run, i) => ({
      label: run.label,
      cash: run.trajectory.series["Cash"],
      bankruptcyTime: run.bankruptcyTime,
      color: OVERLAY_COLORS[i % OVERLAY_COLORS.length],
    })),
  ];
  const longest = overlays.reduce((a, b) =>
    a.cash.length >= b.cash.length ? a : b,
  );
  const times =
    longest.cash.length === t.times.length
      ? t.times
      : view.comparisons.find((r) => r.trajectory.series["Cash"] === longest.cash)
          ?.trajectory.times ?? t.times;
  $("cash-chart").innerHTML = renderSvg(cashChart(times, overlays, CHART), CHART);
}

function renderDeltas(): void {
  const rows = comparisonDeltas(view);
  $("deltas").innerHTML = rows.length
    ? rows
        .map(
          (r) =>
            `<tr><td>${r.label}</td><td>${fmt(r.terminalCash)}</td>` +
            `<td>${r.crossoverTime === null ? "—" : r.crossoverTime.toFixed(2)}</td></tr>`,
        )
        .join("")
    : "";
}

async function onStart(): Promise<void> {
  view = await startRun(api, emptyView());
  if (view.state) {
    view.pending = clampToBounds(view, view.pending);
  }
  render();
}

async function onStep(): Promise<void> {
  view = { ...view, stepInFlight: true };
  render();
  view = await submitStep(api, view);
  render();
}

function onSave(): void {
  const label = `run ${view.comparisons.length + 1}`;
  const run: SavedRun = saveRun(view, label);
  view = addComparison(view, run);
  render();
}

export function boot(): void {
  $("start").addEventListener("click", () => void onStart());
  $("step").addEventListener("click", () => void onStep());
  $("save-run").addEventListener("click", onSave);
  for (const lever of LEVERS) {
    $(lever).addEventListener("input", (e) => {
      view.pending = clampToBounds(view, {
        ...view.pending,
        [lever]: Number((e.target as HTMLInputElement).value),
      });
      render();
    });
  }
  $("duration").addEventListener("change", (e) => {
    view.pending = { ...view.pending, duration: Number((e.target as HTMLInputElement).value) };
  });
  render();
}

if (typeof document !== "undefined" && document.getElementById("start")) {
  boot();
}
