"""Feedback-loop census: enumerate simple cycles of the causal graph and

classify each loop's polarity from sampled link gains.

Graph nodes are stocks, flows, and auxiliaries.  Edges are expression
references (u -> v when v's formula mentions u) plus flow-to-stock edges,
signed +1 for an inflow and -1 for an outflow.  Link gains for expression
edges are estimated by central finite difference at the caller-supplied
sample state; loop polarity is the sign of the product of link gains along
the cycle.  A gain of exactly zero (a min() arm that is slack, say) makes
the loop INDETERMINATE at that sample point.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional

import networkx as nx

from . import expr as ex
from .engine import CompiledModel
from .model import BOUNDARY, ModelSpec

REL_STEP = 1e-4
ABS_FLOOR = 1e-8
DEFAULT_MAX_LENGTH = 12
CYCLE_LIMIT = 10_000


class Polarity(str, enum.Enum):
    REINFORCING = "REINFORCING"
    BALANCING = "BALANCING"
    INDETERMINATE = "INDETERMINATE"


@dataclass(frozen=True)
class Loop:
    members: tuple[str, ...]
    polarity: Polarity
    gain_sample: float

    def as_dict(self):
        return {
            "members": list(self.members),
            "polarity": self.polarity.value,
            "gain_sample": self.gain_sample,
        }


@dataclass
class LoopReport:
    loops: list[Loop]
    truncated: bool = False
    diagnostics: list[str] = field(default_factory=list)

    def by_polarity(self, polarity: Polarity) -> list[Loop]:
        return [l for l in self.loops if l.polarity is polarity]

    def as_dict(self):
        return {
            "loops": [l.as_dict() for l in self.loops],
            "truncated": self.truncated,
            "diagnostics": self.diagnostics,
        }


def find_feedback_loops(
    m: ModelSpec,
    sample_state: dict[str, float],
    *,
    max_length: int = DEFAULT_MAX_LENGTH,
    cycle_limit: int = CYCLE_LIMIT,
    t: Optional[float] = None,
) -> LoopReport:
    """Enumerate simple cycles up to `max_length` nodes and classify them.

    `sample_state` must cover all stocks; parameter entries override the
    declared parameter values for the gain sampling.
    """
    if t is None:
        t = m.time.start
    overrides = {k: v for k, v in sample_state.items() if k in m.parameters}
    cm = CompiledModel(m, overrides)

    state = {s.name: float(sample_state[s.name]) for s in m.stocks}
    init = cm.initial_state(t)
    for key, _, _ in cm.smooth_states:
        state[key] = sample_state.get(key, init[key])
    _, _, env = cm.eval_at(state, t, m.time.dt, clip=False)

    exprs: dict[str, ex.Expression] = {a.name: a.expr for a in m.auxiliaries}
    exprs.update({f.name: f.rate for f in m.flows})
    var_nodes = set(m.stock_names()) | set(exprs)

    g = nx.DiGraph()
    g.add_nodes_from(var_nodes)
    gains: dict[tuple[str, str], float] = {}
    for target, tree in exprs.items():
        for source in ex.identifiers(tree) & var_nodes:
            g.add_edge(source, target)
            gains[(source, target)] = _link_gain(tree, source, env, t, m.lookups)
    stock_set = set(m.stock_names())
    for f in m.flows:
        if f.to in stock_set:
            g.add_edge(f.name, f.to)
            gains[(f.name, f.to)] = 1.0
        if f.from_ in stock_set:
            g.add_edge(f.name, f.from_)
            gains[(f.name, f.from_)] = -1.0

    loops: list[Loop] = []
    truncated = False
    diagnostics: list[str] = []
    for cycle in nx.simple_cycles(g, length_bound=max_length):
        if len(loops) >= cycle_limit:
            truncated = True
            diagnostics.append(
                f"CYCLE_LIMIT_EXCEEDED: more than {cycle_limit} simple cycles; report truncated"
            )
            break
        if not (set(cycle) & stock_set):
            continue
        members = _canonical(cycle)
        product = 1.0
        indeterminate = False
        for i, u in enumerate(members):
            v = members[(i + 1) % len(members)]
            gain = gains[(u, v)]
            if gain == 0.0:
                indeterminate = True
            product *= gain
        if indeterminate:
            polarity = Polarity.INDETERMINATE
        elif product > 0:
            polarity = Polarity.REINFORCING
        else:
            polarity = Polarity.BALANCING
        loops.append(Loop(members=members, polarity=polarity, gain_sample=product))

    loops.sort(key=lambda l: (len(l.members), l.members))
    return LoopReport(loops=loops, truncated=truncated, diagnostics=diagnostics)


def _canonical(cycle: list[str]) -> tuple[str, ...]:
    """Rotate the cycle so the lexicographically smallest member leads."""
    i = min(range(len(cycle)), key=lambda k: cycle[k])
    return tuple(cycle[i:] + cycle[:i])


def _link_gain(tree: ex.Expression, source: str, env: dict, t: float, tables) -> float:
    base = env[source]
    h = max(ABS_FLOOR, REL_STEP * abs(base))
    up = dict(env)
    up[source] = base + h
    down = dict(env)
    down[source] = base - h
    f_up = ex.evaluate(tree, up, t, tables)
    f_down = ex.evaluate(tree, down, t, tables)
    return (f_up - f_down) / (2.0 * h)


def baseline_sample_state(m: ModelSpec) -> dict[str, float]:
    """The declared sample point: stock initials plus parameter values."""
    state = {s.name: s.initial for s in m.stocks}
    state.update({name: p.value for name, p in m.parameters.items()})
    return state
