"""Fixed-step simulation: EULER and classical RK4 over a compiled model.

The engine is deterministic: identical (model, config, overrides) inputs
produce bitwise-identical trajectories.  Non-negative stocks can either be
clipped (with proportional first-order outflow limiting, outflow <=
stock/dt) or turned into hard errors.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional

from . import expr as ex
from .errors import BadOverrideError, NegativeStockError, ValidationFailedError
from .model import BOUNDARY, Diagnostic, ModelSpec, validate_model


class Integrator(str, enum.Enum):
    EULER = "euler"
    RK4 = "rk4"


class NonNegativity(str, enum.Enum):
    CLIP = "clip"
    ERROR = "error"


@dataclass(frozen=True)
class SimConfig:
    integrator: Integrator = Integrator.RK4
    non_negativity: NonNegativity = NonNegativity.CLIP
    record_every: int = 1

    def __post_init__(self):
        if self.record_every < 1:
            raise ValueError("record_every must be >= 1")

    def as_dict(self):
        return {
            "integrator": self.integrator.value,
            "non_negativity": self.non_negativity.value,
            "record_every": self.record_every,
        }


@dataclass
class Trajectory:
    times: list[float]
    series: dict[str, list[float]]
    events: list[tuple[str, float]]
    metadata: dict = field(default_factory=dict)
    # cumulative integral of each (effective) flow over the run, using the
    # integrator's own stage weighting; backs the accounting identity
    flow_totals: dict[str, float] = field(default_factory=dict)

    def final(self, name: str) -> float:
        return self.series[name][-1]

    def event_time(self, name: str) -> Optional[float]:
        for ev, t in self.events:
            if ev == name:
                return t
        return None

    def as_dict(self) -> dict:
        return {
            "times": self.times,
            "series": self.series,
            "events": [{"name": n, "time": t} for n, t in self.events],
            "metadata": self.metadata,
        }


# ---------------------------------------------------------------------------
# Compilation


class CompiledModel:
    """A ModelSpec lowered to python callables, auxiliaries topo-sorted,

    smooth() instances bound to hidden state variables."""

    def __init__(self, m: ModelSpec, overrides: Optional[dict[str, float]] = None):
        self.spec = m
        self.params = {name: p.value for name, p in m.parameters.items()}
        if overrides:
            for name, value in overrides.items():
                if name not in m.parameters:
                    raise BadOverrideError(name, "not a declared parameter")
                p = m.parameters[name]
                if not (p.min <= value <= p.max):
                    raise BadOverrideError(name, f"value {value} outside [{p.min}, {p.max}]")
                self.params[name] = float(value)

        self.stocks = list(m.stocks)
        self.stock_names = [s.name for s in self.stocks]
        self.non_negative = {s.name for s in self.stocks if s.non_negative}

        # assign smooth state keys (stable: keyed by owner and position)
        self.smooth_states: list[tuple[str, object, object]] = []  # key, input fn, tau fn
        tables = m.lookups

        def bind_smooths(owner: str, tree: ex.Expression):
            for i, call in enumerate(ex.smooth_calls(tree)):
                key = f"_smooth.{owner}.{i}"
                call.state_key = key
                self.smooth_states.append(
                    (key, ex.compile_expr(call.args[0], tables), ex.compile_expr(call.args[1], tables))
                )

        aux_order = _topo_sort_auxes(m)
        for a in aux_order:
            bind_smooths(a.name, a.expr)
        for f in m.flows:
            bind_smooths(f.name, f.rate)
        for e in m.events:
            bind_smooths(e.name, e.expr)

        self.aux_fns = [(a.name, ex.compile_expr(a.expr, tables)) for a in aux_order]
        self.flow_fns = [(f.name, ex.compile_expr(f.rate, tables)) for f in m.flows]
        self.event_fns = [
            (e.name, ex.compile_expr(e.expr, tables), e.trigger) for e in m.events
        ]
        self.inflows = {s: [] for s in self.stock_names}
        self.outflows = {s: [] for s in self.stock_names}
        for f in m.flows:
            if f.to != BOUNDARY:
                self.inflows[f.to].append(f.name)
            if f.from_ != BOUNDARY:
                self.outflows[f.from_].append(f.name)
        self.flow_source = {f.name: f.from_ for f in m.flows}

    def initial_state(self, t0: float) -> dict[str, float]:
        """Stock initials plus self-initialized smooth states."""
        state = {s.name: float(s.initial) for s in self.stocks}
        env = dict(self.params)
        env.update(state)
        for name, fn in self.aux_fns:
            env[name] = fn(env, t0)
        for name, fn in self.flow_fns:
            fn(env, t0)
        for name, fn, trigger in self.event_fns:
            fn(env, t0)
        for key, _, _ in self.smooth_states:
            state[key] = env[key]
        return state

    def eval_at(self, state: dict[str, float], t: float, dt: float, clip: bool):
        """Derivatives, effective flow rates, and the full variable env at

        (state, t).  CLIP mode scales the outflows of a non-negative stock
        proportionally so their sum never exceeds stock/dt."""
        env = dict(self.params)
        env.update(state)
        for name, fn in self.aux_fns:
            env[name] = fn(env, t)
        rates = {}
        for name, fn in self.flow_fns:
            rates[name] = fn(env, t)
        if clip:
            factors = {}
            for s in self.stock_names:
                if s not in self.non_negative:
                    continue
                total_out = 0.0
                for fname in self.outflows[s]:
                    r = rates[fname]
                    if r > 0.0:
                        total_out += r
                limit = state[s] / dt
                if total_out > limit:
                    factors[s] = limit / total_out if total_out > 0.0 else 0.0
            if factors:
                for fname, src in self.flow_source.items():
                    if src in factors and rates[fname] > 0.0:
                        rates[fname] = rates[fname] * factors[src]
        for name, r in rates.items():
            env[name] = r
        derivs = {}
        for s in self.stock_names:
            net = 0.0
            for fname in self.inflows[s]:
                net += rates[fname]
            for fname in self.outflows[s]:
                net -= rates[fname]
            derivs[s] = net
        for key, input_fn, tau_fn in self.smooth_states:
            derivs[key] = (input_fn(env, t) - state[key]) / tau_fn(env, t)
        return derivs, rates, env


def _topo_sort_auxes(m: ModelSpec):
    aux_by_name = {a.name: a for a in m.auxiliaries}
    deps = {a.name: ex.identifiers(a.expr) & set(aux_by_name) for a in m.auxiliaries}
    order, done = [], set()

    def visit(name, trail):
        if name in done:
            return
        if name in trail:
            raise ValidationFailedError([Diagnostic("CYCLE", name, "auxiliary cycle")])
        trail.add(name)
        for d in sorted(deps[name]):
            visit(d, trail)
        trail.discard(name)
        done.add(name)
        order.append(aux_by_name[name])

    for a in m.auxiliaries:
        visit(a.name, set())
    return order


# ---------------------------------------------------------------------------
# Stepping


def _advance(cm: CompiledModel, state: dict, t: float, dt: float, cfg: SimConfig,
             k1=None):
    """One integration step.  Returns (new_state, flow_increments).

    k1 is the pre-computed (derivs, rates) at (state, t) if available."""
    clip = cfg.non_negativity is NonNegativity.CLIP
    if k1 is None:
        d1, r1, _ = cm.eval_at(state, t, dt, clip)
    else:
        d1, r1 = k1
    if cfg.integrator is Integrator.EULER:
        new = {k: state[k] + dt * d1[k] for k in state}
        incr = {name: dt * r1[name] for name in r1}
    else:
        half = dt / 2.0
        s2 = {k: state[k] + half * d1[k] for k in state}
        d2, r2, _ = cm.eval_at(s2, t + half, dt, clip)
        s3 = {k: state[k] + half * d2[k] for k in state}
        d3, r3, _ = cm.eval_at(s3, t + half, dt, clip)
        s4 = {k: state[k] + dt * d3[k] for k in state}
        d4, r4, _ = cm.eval_at(s4, t + dt, dt, clip)
        sixth = dt / 6.0
        new = {
            k: state[k] + sixth * (d1[k] + 2.0 * d2[k] + 2.0 * d3[k] + d4[k])
            for k in state
        }
        incr = {
            name: sixth * (r1[name] + 2.0 * r2[name] + 2.0 * r3[name] + r4[name])
            for name in r1
        }
    for s in cm.non_negative:
        if new[s] < 0.0:
            if clip:
                new[s] = 0.0
            else:
                raise NegativeStockError(s, t + dt)
    return new, incr


def integrate_step(m: ModelSpec, state: dict[str, float], t: float, dt: float,
                   cfg: SimConfig) -> dict[str, float]:
    """Advance one step from `state` at time t; returns the new state.

    `state` must cover every stock; smooth states (keys starting with
    "_smooth.") are carried along when present.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    cm = CompiledModel(m)
    full = {s.name: float(state[s.name]) for s in m.stocks}
    for key, _, _ in cm.smooth_states:
        if key in state:
            full[key] = state[key]
    if len(full) < len(cm.smooth_states) + len(m.stocks):
        # self-initialize missing smooth states at t
        init = cm.initial_state(t)
        for key, _, _ in cm.smooth_states:
            full.setdefault(key, init[key])
    new, _ = _advance(cm, full, t, dt, cfg)
    return new


def simulate(m: ModelSpec, cfg: SimConfig = SimConfig(),
             overrides: Optional[dict[str, float]] = None,
             *, initial_state: Optional[dict[str, float]] = None,
             step_offset: int = 0, n_steps: Optional[int] = None) -> Trajectory:
    """Run the model over its time config and record all variables.

    `initial_state`, `step_offset` and `n_steps` support resumable stepping
    (the flight-simulator sessions): times are computed as
    start + (step_offset + i) * dt so a stepped run reproduces a batch run
    bit-for-bit.
    """
    diags = validate_model(m)
    if diags:
        raise ValidationFailedError(diags)
    cm = CompiledModel(m, overrides)
    tc = m.time
    start = tc.start + step_offset * tc.dt
    if n_steps is None:
        n_steps = int(round((tc.stop - start) / tc.dt))
    clip = cfg.non_negativity is NonNegativity.CLIP

    state = cm.initial_state(start) if initial_state is None else dict(initial_state)
    if initial_state is not None:
        for key, _, _ in cm.smooth_states:
            if key not in state:
                state[key] = cm.initial_state(start)[key]

    record_names = cm.stock_names + [f.name for f in m.flows] + [a.name for a in m.auxiliaries]
    times: list[float] = []
    series: dict[str, list[float]] = {name: [] for name in record_names}
    events: list[tuple[str, float]] = []
    fired: set[str] = set()
    flow_totals = {f.name: 0.0 for f in m.flows}

    for i in range(n_steps + 1):
        t = tc.start + (step_offset + i) * tc.dt
        d1, r1, env = cm.eval_at(state, t, tc.dt, clip)
        for name, fn, trigger in cm.event_fns:
            if name in fired:
                continue
            v = fn(env, t)
            if (v > 0.0) if trigger == ">0" else (v >= 0.0):
                fired.add(name)
                events.append((name, t))
        if i % cfg.record_every == 0:
            times.append(t)
            for name in record_names:
                series[name].append(env[name])
        if i == n_steps:
            final_state = state
            break
        state, incr = _advance(cm, state, t, tc.dt, cfg, k1=(d1, r1))
        for name, v in incr.items():
            flow_totals[name] += v

    traj = Trajectory(
        times=times,
        series=series,
        events=events,
        metadata={
            "model": m.name,
            "config": cfg.as_dict(),
            "overrides": dict(overrides or {}),
        },
        flow_totals=flow_totals,
    )
    traj.metadata["final_state"] = dict(final_state)
    return traj
