"""Policy experimentation: grid sweeps, derivative-free optimization under a

no-bankruptcy constraint, Monte-Carlo uncertainty ensembles, and
one-at-a-time sensitivity.

All stochastic operations are pure functions of their seed.  Ensemble runs
draw from a counter-based generator keyed by (seed, run index), so results
are independent of evaluation order.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.optimize import Bounds, minimize

from .engine import SimConfig, simulate
from .errors import GridTooLargeError, InvalidScenarioError
from .transition import (
    DEFAULT_DT,
    HORIZON_MONTHS,
    KPIReport,
    TransitionScenario,
    build_transition_model,
    compute_kpis,
)

GRID_POINT_LIMIT = 1_000_000


class ObjectiveKind(str, enum.Enum):
    TERMINAL_CASH = "TERMINAL_CASH"          # maximize
    TIME_TO_COMPLETION = "TIME_TO_COMPLETION"  # minimize
    MEAN_UNIT_COST = "MEAN_UNIT_COST"          # minimize


@dataclass(frozen=True)
class PolicyDim:
    name: str
    lo: float
    hi: float


@dataclass(frozen=True)
class PolicySpace:
    dims: tuple[PolicyDim, ...]
    granularity: int = 11

    def __post_init__(self):
        if not self.dims:
            raise ValueError("policy space needs at least one dimension")
        for d in self.dims:
            if not d.lo < d.hi:
                raise ValueError(f"dim {d.name}: lo must be below hi")
        if self.granularity < 2:
            raise ValueError("granularity must be >= 2")

    def check_names(self, s: TransitionScenario):
        s.replace(**self.center())

    def center(self) -> dict[str, float]:
        return {d.name: (d.lo + d.hi) / 2.0 for d in self.dims}


@dataclass(frozen=True)
class Objective:
    kind: ObjectiveKind = ObjectiveKind.TERMINAL_CASH
    no_bankruptcy: bool = True
    penalty: float = 1_000_000.0  # CHF-equivalent per month spent bankrupt

    def __post_init__(self):
        if self.no_bankruptcy and not self.penalty > 0:
            raise ValueError("penalty must be positive when the constraint is set")

    @property
    def maximize(self) -> bool:
        return self.kind is ObjectiveKind.TERMINAL_CASH


@dataclass
class PolicyResult:
    best_point: dict[str, float]
    objective_value: float
    feasible: bool
    evaluations: int
    trace: list[tuple[dict[str, float], float, bool]] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "best_point": self.best_point,
            "objective_value": self.objective_value,
            "feasible": self.feasible,
            "evaluations": self.evaluations,
        }


@dataclass(frozen=True)
class ParameterDistribution:
    name: str
    kind: str  # "uniform" | "triangular" | "point"
    lo: float = 0.0
    mode: float = 0.0
    hi: float = 0.0
    value: float = 0.0

    def __post_init__(self):
        if self.kind == "uniform":
            if not self.lo <= self.hi:
                raise ValueError(f"{self.name}: lo must not exceed hi")
        elif self.kind == "triangular":
            if not self.lo <= self.mode <= self.hi:
                raise ValueError(f"{self.name}: need lo <= mode <= hi")
        elif self.kind != "point":
            raise ValueError(f"{self.name}: unknown distribution kind {self.kind!r}")

    def draw(self, rng: np.random.Generator) -> float:
        if self.kind == "uniform":
            return float(rng.uniform(self.lo, self.hi))
        if self.kind == "triangular":
            return float(rng.triangular(self.lo, self.mode, self.hi))
        return float(self.value)

    @staticmethod
    def uniform(name: str, lo: float, hi: float) -> "ParameterDistribution":
        return ParameterDistribution(name, "uniform", lo=lo, hi=hi)

    @staticmethod
    def triangular(name: str, lo: float, mode: float, hi: float) -> "ParameterDistribution":
        return ParameterDistribution(name, "triangular", lo=lo, mode=mode, hi=hi)

    @staticmethod
    def point(name: str, value: float) -> "ParameterDistribution":
        return ParameterDistribution(name, "point", value=value)


# ---------------------------------------------------------------------------
# Objective evaluation


class PolicyEvaluator:
    """Simulates the transition model at a policy point and scores it.

    Score orientation is maximize; minimize-kind objectives are negated.
    Infeasible (bankrupt) points additionally pay `penalty` per month spent
    bankrupt, which guides the search without hiding how bad a policy is.
    """

    def __init__(self, s: TransitionScenario, obj: Objective,
                 sim_config: SimConfig = SimConfig(),
                 stop: float = HORIZON_MONTHS, dt: float = DEFAULT_DT):
        self.scenario = s
        self.obj = obj
        self.sim_config = sim_config
        self.stop = stop
        self.dt = dt

    def kpis(self, point: dict[str, float]) -> KPIReport:
        s = self.scenario.replace(**point)
        traj = simulate(build_transition_model(s, stop=self.stop, dt=self.dt), self.sim_config)
        return compute_kpis(traj, s)

    def raw_value(self, kpi: KPIReport) -> float:
        if self.obj.kind is ObjectiveKind.TERMINAL_CASH:
            return kpi.terminal_cash
        if self.obj.kind is ObjectiveKind.TIME_TO_COMPLETION:
            # incomplete transitions rank behind any completed one
            return kpi.transition_completion if kpi.transition_completion is not None else 2.0 * self.stop
        mean_cost = kpi.mean_unit_cost()
        return mean_cost if mean_cost is not None else float("inf")

    def evaluate(self, point: dict[str, float]) -> tuple[float, bool, float]:
        """Returns (objective value, feasible, penalized score)."""
        kpi = self.kpis(point)
        value = self.raw_value(kpi)
        score = value if self.obj.maximize else -value
        feasible = True
        if self.obj.no_bankruptcy and kpi.bankruptcy_time is not None:
            feasible = False
            score -= self.obj.penalty * (self.stop - kpi.bankruptcy_time)
        return value, feasible, score


def _pick_best(trace: list[tuple[dict, float, bool]], scores: list[float],
               maximize: bool) -> tuple[dict, float, bool]:
    """Feasibility dominates: best feasible point by raw objective, else the

    least-penalized infeasible point."""
    feasible_ix = [i for i, row in enumerate(trace) if row[2]]
    if feasible_ix:
        better = max if maximize else min
        i = better(feasible_ix, key=lambda i: trace[i][1])
        return trace[i][0], trace[i][1], True
    i = max(range(len(trace)), key=lambda i: scores[i])
    return trace[i][0], trace[i][1], False


# ---------------------------------------------------------------------------
# Operations


def grid_sweep(s: TransitionScenario, space: PolicySpace, obj: Objective,
               *, sim_config: SimConfig = SimConfig(),
               stop: float = HORIZON_MONTHS, dt: float = DEFAULT_DT) -> PolicyResult:
    """Exhaustive Cartesian sweep in deterministic row-major order

    (first dimension outermost)."""
    space.check_names(s)
    total = space.granularity ** len(space.dims)
    if total > GRID_POINT_LIMIT:
        raise GridTooLargeError(total, GRID_POINT_LIMIT)
    axes = [np.linspace(d.lo, d.hi, space.granularity) for d in space.dims]
    names = [d.name for d in space.dims]
    ev = PolicyEvaluator(s, obj, sim_config, stop, dt)
    trace, scores = [], []
    for combo in itertools.product(*axes):
        point = {n: float(v) for n, v in zip(names, combo)}
        value, feasible, score = ev.evaluate(point)
        trace.append((point, value, feasible))
        scores.append(score)
    best_point, best_value, feasible = _pick_best(trace, scores, obj.maximize)
    return PolicyResult(best_point, best_value, feasible, len(trace), trace)


def optimize_policy(s: TransitionScenario, space: PolicySpace, obj: Objective,
                    budget: int, seed: int,
                    *, sim_config: SimConfig = SimConfig(),
                    stop: float = HORIZON_MONTHS, dt: float = DEFAULT_DT,
                    objective_fn: Optional[Callable[[dict[str, float]], float]] = None
                    ) -> PolicyResult:
    """Derivative-free local search: Nelder-Mead with box constraints and

    three restarts (center of the box, then two seeded random starts).
    Bankruptcy is penalized during the search; the reported best point is
    re-checked with the hard feasibility rule.

    `objective_fn` swaps in a synthetic score-to-maximize over policy
    points (for testing the search itself); feasibility is then always
    true and no simulation runs.
    """
    space.check_names(s)
    if budget < 10 * len(space.dims):
        raise ValueError(f"budget must be at least {10 * len(space.dims)}")
    names = [d.name for d in space.dims]
    lo = np.array([d.lo for d in space.dims])
    hi = np.array([d.hi for d in space.dims])
    ev = PolicyEvaluator(s, obj, sim_config, stop, dt)
    trace: list[tuple[dict, float, bool]] = []
    scores: list[float] = []

    def eval_point(x: np.ndarray) -> float:
        point = {n: float(v) for n, v in zip(names, np.clip(x, lo, hi))}
        if objective_fn is not None:
            score = float(objective_fn(point))
            value, feasible = score, True
        else:
            value, feasible, score = ev.evaluate(point)
        trace.append((point, value, feasible))
        scores.append(score)
        return -score  # scipy minimizes

    rng = np.random.default_rng(seed)
    starts = [(lo + hi) / 2.0] + [rng.uniform(lo, hi) for _ in range(2)]
    per_restart = max(budget // len(starts), 2 * len(names) + 2)
    for x0 in starts:
        if len(trace) >= budget:
            break
        minimize(
            eval_point,
            x0,
            method="Nelder-Mead",
            bounds=Bounds(lo, hi),
            options={
                "maxfev": min(per_restart, budget - len(trace)),
                "xatol": 1e-6,
                "fatol": 1e-9,
            },
        )
    # a synthetic objective is a score to maximize by convention
    maximize = obj.maximize if objective_fn is None else True
    best_point, best_value, feasible = _pick_best(trace, scores, maximize)
    return PolicyResult(best_point, best_value, feasible, len(trace), trace)


@dataclass
class EnsembleSummary:
    n: int
    bankruptcy_probability: float
    kpis: dict[str, dict[str, Optional[float]]]  # name -> {mean, p10, p90, n_defined}

    def as_dict(self) -> dict:
        return {
            "n": self.n,
            "bankruptcy_probability": self.bankruptcy_probability,
            "kpis": self.kpis,
        }


def _summary(values: list[Optional[float]]) -> dict[str, Optional[float]]:
    defined = [v for v in values if v is not None]
    if not defined:
        return {"mean": None, "p10": None, "p90": None, "n_defined": 0}
    arr = np.asarray(defined, dtype=float)
    if arr.min() == arr.max():
        # degenerate ensembles reproduce the deterministic value bitwise
        mean = p10 = p90 = float(arr[0])
    else:
        mean = float(arr.mean())
        p10 = float(np.percentile(arr, 10.0))
        p90 = float(np.percentile(arr, 90.0))
    return {"mean": mean, "p10": p10, "p90": p90, "n_defined": len(defined)}


def monte_carlo(s: TransitionScenario, dists: Sequence[ParameterDistribution],
                n: int, seed: int,
                *, sim_config: SimConfig = SimConfig(),
                stop: float = HORIZON_MONTHS, dt: float = DEFAULT_DT) -> EnsembleSummary:
    """Uncertainty ensemble over the given parameter distributions."""
    if n < 1:
        raise ValueError("n must be >= 1")
    collected: dict[str, list[Optional[float]]] = {
        "terminal_cash": [],
        "mean_unit_cost": [],
        "crossover_time": [],
        "completion_time": [],
        "bankruptcy_time": [],
    }
    bankrupt = 0
    for i in range(n):
        rng = np.random.default_rng([seed, i])
        draws = {d.name: d.draw(rng) for d in dists}
        si = s.replace(**draws).validate()
        traj = simulate(build_transition_model(si, stop=stop, dt=dt), sim_config)
        kpi = compute_kpis(traj, si)
        collected["terminal_cash"].append(kpi.terminal_cash)
        collected["mean_unit_cost"].append(kpi.mean_unit_cost())
        collected["crossover_time"].append(kpi.crossover_time)
        collected["completion_time"].append(kpi.transition_completion)
        collected["bankruptcy_time"].append(kpi.bankruptcy_time)
        if kpi.bankruptcy_time is not None:
            bankrupt += 1
    return EnsembleSummary(
        n=n,
        bankruptcy_probability=bankrupt / n,
        kpis={name: _summary(vals) for name, vals in collected.items()},
    )


def sensitivity(s: TransitionScenario, parameters: Sequence[str], delta: float,
                *, sim_config: SimConfig = SimConfig(),
                stop: float = HORIZON_MONTHS, dt: float = DEFAULT_DT
                ) -> list[dict]:
    """One-at-a-time central-difference elasticities on terminal cash,

    crossover time, and completion time.  An elasticity is None where the
    output is undefined on either side (or at the base point)."""
    if not 0.0 < delta <= 0.5:
        raise ValueError("delta must be in (0, 0.5]")

    def run(si: TransitionScenario) -> KPIReport:
        traj = simulate(build_transition_model(si, stop=stop, dt=dt), sim_config)
        return compute_kpis(traj, si)

    base = run(s)
    base_outputs = {
        "terminal_cash": base.terminal_cash,
        "crossover_time": base.crossover_time,
        "completion_time": base.transition_completion,
    }
    rows = []
    for name in parameters:
        v = getattr(s, name)
        row: dict = {"parameter": name}
        try:
            up = run(s.replace(**{name: v * (1.0 + delta)}).validate())
            down = run(s.replace(**{name: v * (1.0 - delta)}).validate())
        except InvalidScenarioError:
            for out in base_outputs:
                row[out] = None
            rows.append(row)
            continue
        up_outputs = {
            "terminal_cash": up.terminal_cash,
            "crossover_time": up.crossover_time,
            "completion_time": up.transition_completion,
        }
        down_outputs = {
            "terminal_cash": down.terminal_cash,
            "crossover_time": down.crossover_time,
            "completion_time": down.transition_completion,
        }
        for out, f0 in base_outputs.items():
            f_up, f_down = up_outputs[out], down_outputs[out]
            if f0 is None or f0 == 0.0 or f_up is None or f_down is None:
                row[out] = None
            else:
                row[out] = ((f_up - f_down) / f0) / (2.0 * delta)
        rows.append(row)
    return rows
