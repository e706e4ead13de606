"""Batch command line: run, sweep, optimize, mc, loops, serve.

Exit codes: 0 success, 2 validation diagnostics (printed human-readable or
as JSON with --json), 1 runtime error.  Artifacts are written atomically;
input files are never modified.
"""

from __future__ import annotations

import json
import os
import sys
from pathlib import Path

import click

from . import io as tio
from .engine import Integrator, NonNegativity, SimConfig, simulate
from .errors import (
    DuplicateNameError,
    ExpressionSyntaxError,
    I4SimError,
    InvalidScenarioError,
    ModelDocumentError,
    UnknownFunctionError,
    ValidationFailedError,
)
from .lab import (
    Objective,
    ObjectiveKind,
    ParameterDistribution,
    PolicyDim,
    PolicySpace,
    grid_sweep,
    monte_carlo,
    optimize_policy,
)
from .loops import baseline_sample_state, find_feedback_loops
from .model import ModelSpec, parse_model, validate_model
from .models import bundled_model_text
from .transition import (
    DEFAULT_DT,
    TransitionScenario,
    build_transition_model,
    compute_kpis,
    default_scenario,
    scenario_from_dict,
)

EXIT_RUNTIME = 1
EXIT_VALIDATION = 2

_VALIDATION_ERRORS = (
    ModelDocumentError,
    ExpressionSyntaxError,
    UnknownFunctionError,
    DuplicateNameError,
    ValidationFailedError,
    InvalidScenarioError,
)


class CliState:
    def __init__(self, out: Path, as_json: bool):
        self.out = out
        self.as_json = as_json


def _fail_validation(state: CliState, diagnostics: list[dict]):
    if state.as_json:
        click.echo(json.dumps({"diagnostics": diagnostics}, indent=2))
    else:
        for d in diagnostics:
            click.echo(f"error: {d['message']}", err=True)
    sys.exit(EXIT_VALIDATION)


def _error_payload(e: Exception) -> dict:
    payload = {"message": str(e)}
    for attr in ("line", "col", "name", "kind"):
        if hasattr(e, attr):
            payload[attr] = getattr(e, attr)
    if isinstance(e, ValidationFailedError):
        payload["diagnostics"] = [d.as_dict() for d in e.diagnostics]
    return payload


def _guard(state: CliState, fn):
    try:
        fn()
    except _VALIDATION_ERRORS as e:
        _fail_validation(state, [_error_payload(e)])
    except I4SimError as e:
        click.echo(f"error: {e}", err=True)
        sys.exit(EXIT_RUNTIME)


def _load_model(model_path: str | None, scenario: TransitionScenario,
                dt: float | None) -> ModelSpec:
    if model_path:
        m = parse_model(Path(model_path).read_text(encoding="utf-8"))
        if dt is not None:
            from .model import TimeConfig

            m.time = TimeConfig(m.time.start, m.time.stop, dt)
        return m
    return build_transition_model(scenario, dt=dt if dt is not None else DEFAULT_DT)


def _load_scenario(path: str | None) -> TransitionScenario:
    if path is None:
        return default_scenario()
    with open(path, encoding="utf-8") as fh:
        return scenario_from_dict(json.load(fh))


def _sim_config(integrator: str) -> SimConfig:
    return SimConfig(integrator=Integrator(integrator), non_negativity=NonNegativity.CLIP)


def _validate_or_exit(state: CliState, m: ModelSpec):
    diags = validate_model(m)
    if diags:
        _fail_validation(state, [d.as_dict() for d in diags])


@click.group()
@click.option("--out", type=click.Path(path_type=Path), default=None,
              help="output directory (env I4SIM_OUT overrides the default '.')")
@click.option("--json", "as_json", is_flag=True, help="machine-readable diagnostics")
@click.pass_context
def main(ctx, out, as_json):
    """System-dynamics lab for the Industry 4.0 transition model."""
    if out is None:
        out = Path(os.environ.get("I4SIM_OUT", "."))
    out.mkdir(parents=True, exist_ok=True)
    ctx.obj = CliState(out, as_json)


@main.command()
@click.option("--model", "model_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--scenario", "scenario_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--integrator", type=click.Choice(["euler", "rk4"]), default="rk4")
@click.option("--dt", type=float, default=None)
@click.pass_obj
def run(state: CliState, model_path, scenario_path, integrator, dt):
    """Simulate and export trajectory.csv (plus kpis.json when possible)."""

    def go():
        scenario = _load_scenario(scenario_path)
        m = _load_model(model_path, scenario, dt)
        _validate_or_exit(state, m)
        traj = simulate(m, _sim_config(integrator))
        tio.export_csv(traj, state.out / "trajectory.csv")
        try:
            kpi = compute_kpis(traj, scenario)
        except I4SimError:
            kpi = None  # a generic model without the transition variables
        if kpi is not None:
            tio.write_json(state.out / "kpis.json", kpi.as_dict())
        click.echo(f"wrote {state.out / 'trajectory.csv'}")

    _guard(state, go)


@main.command()
@click.option("--model", "model_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--scenario", "scenario_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--max-length", type=int, default=12, show_default=True)
@click.pass_obj
def loops(state: CliState, model_path, scenario_path, max_length):
    """Feedback-loop census at the baseline state; writes loops.json."""

    def go():
        scenario = _load_scenario(scenario_path)
        m = _load_model(model_path, scenario, None)
        _validate_or_exit(state, m)
        report = find_feedback_loops(m, baseline_sample_state(m), max_length=max_length)
        tio.write_json(state.out / "loops.json", report.as_dict())
        click.echo(f"wrote {state.out / 'loops.json'} ({len(report.loops)} loops)")

    _guard(state, go)


def _experiment(path: str, seed_override: int | None):
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    scenario = scenario_from_dict(doc.get("scenario", {}))
    space = None
    if "space" in doc:
        space = PolicySpace(
            tuple(PolicyDim(d["name"], float(d["lo"]), float(d["hi"])) for d in doc["space"]["dims"]),
            granularity=int(doc["space"].get("granularity", 11)),
        )
    objdoc = doc.get("objective", {})
    obj = Objective(
        kind=ObjectiveKind(objdoc.get("kind", "TERMINAL_CASH")),
        no_bankruptcy=bool(objdoc.get("no_bankruptcy", True)),
        penalty=float(objdoc.get("penalty", 1_000_000.0)),
    )
    dists = [
        ParameterDistribution(
            name=d["name"], kind=d["kind"],
            lo=float(d.get("lo", 0.0)), mode=float(d.get("mode", 0.0)),
            hi=float(d.get("hi", 0.0)), value=float(d.get("value", 0.0)),
        )
        for d in doc.get("distributions", [])
    ]
    sim = doc.get("sim", {})
    cfg = _sim_config(sim.get("integrator", "rk4"))
    dt = float(sim.get("dt", DEFAULT_DT))
    budget = int(doc.get("budget", 500))
    runs = int(doc.get("runs", 100))
    seed = seed_override if seed_override is not None else int(doc.get("seed", 0))
    return scenario, space, obj, dists, cfg, dt, budget, runs, seed


def _write_trace(state: CliState, result):
    lines = []
    names = list(result.trace[0][0]) if result.trace else []
    lines.append(",".join(names + ["objective", "feasible"]))
    for point, value, feasible in result.trace:
        lines.append(",".join([repr(point[n]) for n in names] + [repr(value), str(int(feasible))]))
    tio._atomic_write(state.out / "trace.csv", "\n".join(lines) + "\n")


@main.command()
@click.option("--experiment", "experiment_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--seed", type=int, default=None)
@click.pass_obj
def sweep(state: CliState, experiment_path, seed):
    """Exhaustive grid sweep; writes result.json and trace.csv."""

    def go():
        scenario, space, obj, _, cfg, dt, _, _, _ = _experiment(experiment_path, seed)
        result = grid_sweep(scenario, space, obj, sim_config=cfg, dt=dt)
        tio.write_json(state.out / "result.json", result.as_dict())
        _write_trace(state, result)
        click.echo(f"wrote {state.out / 'result.json'}")

    _guard(state, go)


@main.command()
@click.option("--experiment", "experiment_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--seed", type=int, default=None)
@click.pass_obj
def optimize(state: CliState, experiment_path, seed):
    """Derivative-free policy search; writes result.json and trace.csv."""

    def go():
        scenario, space, obj, _, cfg, dt, budget, _, sd = _experiment(experiment_path, seed)
        result = optimize_policy(scenario, space, obj, budget, sd, sim_config=cfg, dt=dt)
        tio.write_json(state.out / "result.json", result.as_dict())
        _write_trace(state, result)
        click.echo(f"wrote {state.out / 'result.json'}")

    _guard(state, go)


@main.command()
@click.option("--experiment", "experiment_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--seed", type=int, default=None)
@click.pass_obj
def mc(state: CliState, experiment_path, seed):
    """Monte-Carlo uncertainty ensemble; writes result.json."""

    def go():
        scenario, _, _, dists, cfg, dt, _, runs, sd = _experiment(experiment_path, seed)
        summary = monte_carlo(scenario, dists, runs, sd, sim_config=cfg, dt=dt)
        tio.write_json(state.out / "result.json", summary.as_dict())
        click.echo(f"wrote {state.out / 'result.json'}")

    _guard(state, go)


@main.command()
@click.option("--port", type=int, default=4640, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--journal-dir", type=click.Path(path_type=Path), default=None,
              help="append-only per-session journals for crash recovery")
def serve(port, host, journal_dir):
    """Start the flight-simulator session server."""
    import uvicorn

    from .server import create_app

    uvicorn.run(create_app(journal_dir=journal_dir), host=host, port=port)


@main.command(name="bundled-model")
@click.pass_obj
def bundled_model(state: CliState):
    """Print the bundled transition model document."""
    click.echo(bundled_model_text(), nl=False)


if __name__ == "__main__":
    main()
