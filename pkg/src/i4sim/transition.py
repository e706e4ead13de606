"""The Industry 4.0 transition model of a mid-sized manufacturer.

Six stocks: Cash plus legacy/new machines and staff.  Production follows a
min-capacity (Liebig) form on both machine and staff capacity, so zero
trained staff forces zero new-line output regardless of installed machines.
A clamp-based liquidity factor chokes both machine acquisition and hiring
when cash approaches the reserve, realizing the balancing loops; demand
uplift from the new line's output share closes the reinforcing
sales-investment loop.

Baseline numbers are round-magnitude values for a firm of about a hundred
employees, tuned so the default 60-month run survives (no bankruptcy),
crosses over its staff mix, and ends with a lower blended unit cost.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from typing import Optional

from . import expr as ex
from .engine import SimConfig, Trajectory, simulate
from .errors import InvalidScenarioError, MissingSeriesError
from .model import BOUNDARY, AuxDef, EventDef, FlowDef, ModelSpec, ParamDef, StockDef, TimeConfig

HORIZON_MONTHS = 60.0
DEFAULT_DT = 0.0625
COMPLETION_LEGACY_SHARE = 0.05

BANKRUPTCY = "BANKRUPTCY"
CROSSOVER = "CROSSOVER"
COMPLETION = "COMPLETION"

# fields that are stock initials rather than model parameters
_INITIAL_FIELDS = {
    "cash0": "Cash",
    "legacy_machines0": "LegacyMachines",
    "i40_idle0": "I40Idle",
    "i40_inuse0": "I40InUse",
    "legacy_staff0": "LegacyStaff",
    "i40_staff0": "I40Staff",
}

POLICY_FIELDS = ("policy_acquisition_rate", "policy_hire_rate", "policy_dismiss_rate")


@dataclass(frozen=True)
class TransitionScenario:
    # liquidity
    cash0: float            # CHF
    reserve_cash: float     # CHF
    liquidity_buffer: float  # CHF
    # machine park
    legacy_machines0: float  # machines
    i40_idle0: float
    i40_inuse0: float
    # workforce
    legacy_staff0: float    # people
    i40_staff0: float
    # machines
    machine_price: float    # CHF/machine
    storage_cost: float     # CHF/(machine*month)
    commissioning_time: float  # months
    legacy_life: float      # months
    staff_per_i40_machine: float     # people/machine
    staff_per_legacy_machine: float
    # productivity
    output_per_legacy_machine: float  # units/(machine*month)
    output_per_i40_machine: float
    output_per_legacy_worker: float   # units/(person*month)
    output_per_i40_worker: float
    # unit economics
    unit_cost_legacy: float  # CHF/unit, non-payroll variable cost
    unit_cost_i40: float
    wage_legacy: float      # CHF/(person*month)
    wage_i40: float
    hire_cost: float        # CHF/person
    severance_cost: float   # CHF/person
    price: float            # CHF/unit
    base_demand: float      # units/month
    value_uplift: float     # dimensionless demand multiplier at full share
    fixed_costs: float      # CHF/month
    # policy levers
    policy_acquisition_rate: float  # machines/month
    policy_hire_rate: float         # people/month
    policy_dismiss_rate: float      # people/month

    def violations(self) -> list[str]:
        out = []
        if not self.unit_cost_i40 < self.unit_cost_legacy:
            out.append("unit_cost_i40 must be below unit_cost_legacy")
        if not self.wage_i40 > self.wage_legacy:
            out.append("wage_i40 must exceed wage_legacy")
        if not self.severance_cost > 0:
            out.append("severance_cost must be positive")
        for name in _INITIAL_FIELDS:
            if getattr(self, name) < 0:
                out.append(f"{name} must be non-negative")
        for name in (
            "commissioning_time", "legacy_life", "machine_price", "price",
            "wage_legacy", "base_demand", "liquidity_buffer",
            "staff_per_i40_machine", "staff_per_legacy_machine",
            "output_per_legacy_machine", "output_per_i40_machine",
            "output_per_legacy_worker", "output_per_i40_worker",
            "unit_cost_i40",
        ):
            if not getattr(self, name) > 0:
                out.append(f"{name} must be positive")
        for name in (
            "reserve_cash", "storage_cost", "hire_cost", "fixed_costs",
            "value_uplift", *POLICY_FIELDS,
        ):
            if getattr(self, name) < 0:
                out.append(f"{name} must be non-negative")
        return out

    def validate(self) -> "TransitionScenario":
        bad = self.violations()
        if bad:
            raise InvalidScenarioError(bad)
        return self

    def replace(self, **changes) -> "TransitionScenario":
        unknown = set(changes) - {f.name for f in dataclasses.fields(self)}
        if unknown:
            raise InvalidScenarioError([f"unknown field {n!r}" for n in sorted(unknown)])
        return dataclasses.replace(self, **changes)

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


def default_scenario() -> TransitionScenario:
    return TransitionScenario(
        cash0=1_500_000.0,
        reserve_cash=100_000.0,
        liquidity_buffer=2_000_000.0,
        legacy_machines0=45.0,
        i40_idle0=2.0,
        i40_inuse0=2.0,
        legacy_staff0=90.0,
        i40_staff0=10.0,
        machine_price=500_000.0,
        storage_cost=6_000.0,
        commissioning_time=3.0,
        legacy_life=120.0,
        staff_per_i40_machine=2.0,
        staff_per_legacy_machine=2.0,
        output_per_legacy_machine=100.0,
        output_per_i40_machine=250.0,
        output_per_legacy_worker=55.0,
        output_per_i40_worker=130.0,
        unit_cost_legacy=90.0,
        unit_cost_i40=40.0,
        wage_legacy=6_000.0,
        wage_i40=9_000.0,
        hire_cost=10_000.0,
        severance_cost=20_000.0,
        price=285.0,
        base_demand=4_500.0,
        value_uplift=0.3,
        fixed_costs=250_000.0,
        policy_acquisition_rate=0.5,
        policy_hire_rate=1.0,
        policy_dismiss_rate=2.0,
    )


def scenario_from_dict(overrides: dict) -> TransitionScenario:
    """Partial scenario files merge over the defaults."""
    return default_scenario().replace(**{k: float(v) for k, v in overrides.items()}).validate()


def load_scenario(path: str) -> TransitionScenario:
    with open(path, encoding="utf-8") as fh:
        return scenario_from_dict(json.load(fh))


# ---------------------------------------------------------------------------
# Model builder


def build_transition_model(
    s: TransitionScenario,
    *,
    start: float = 0.0,
    stop: float = HORIZON_MONTHS,
    dt: float = DEFAULT_DT,
) -> ModelSpec:
    s.validate()

    def param(name: str, units: str, lo: float = 0.0, hi: float = 1e12) -> tuple[str, ParamDef]:
        return name, ParamDef(value=getattr(s, name), units=units, min=lo, max=hi)

    parameters = dict(
        [
            param("reserve_cash", "CHF"),
            param("liquidity_buffer", "CHF", lo=1e-9),
            param("machine_price", "CHF/machine", lo=1e-9),
            param("storage_cost", "CHF/(machine*month)"),
            param("commissioning_time", "months", lo=1e-9),
            param("legacy_life", "months", lo=1e-9),
            param("staff_per_i40_machine", "people/machine", lo=1e-9),
            param("staff_per_legacy_machine", "people/machine", lo=1e-9),
            param("output_per_legacy_machine", "units/(machine*month)", lo=1e-9),
            param("output_per_i40_machine", "units/(machine*month)", lo=1e-9),
            param("output_per_legacy_worker", "units/(person*month)", lo=1e-9),
            param("output_per_i40_worker", "units/(person*month)", lo=1e-9),
            param("unit_cost_legacy", "CHF/unit", lo=1e-9),
            param("unit_cost_i40", "CHF/unit", lo=1e-9),
            param("wage_legacy", "CHF/(person*month)", lo=1e-9),
            param("wage_i40", "CHF/(person*month)", lo=1e-9),
            param("hire_cost", "CHF/person"),
            param("severance_cost", "CHF/person", lo=1e-9),
            param("price", "CHF/unit", lo=1e-9),
            param("base_demand", "units/month", lo=1e-9),
            param("value_uplift", ""),
            param("fixed_costs", "CHF/month"),
            param("policy_acquisition_rate", "machines/month"),
            param("policy_hire_rate", "people/month"),
            param("policy_dismiss_rate", "people/month"),
        ]
    )

    stocks = [
        StockDef("Cash", s.cash0, "CHF", non_negative=False),
        StockDef("LegacyMachines", s.legacy_machines0, "machines", non_negative=True),
        StockDef("I40Idle", s.i40_idle0, "machines", non_negative=True),
        StockDef("I40InUse", s.i40_inuse0, "machines", non_negative=True),
        StockDef("LegacyStaff", s.legacy_staff0, "people", non_negative=True),
        StockDef("I40Staff", s.i40_staff0, "people", non_negative=True),
    ]

    def aux(name: str, source: str) -> AuxDef:
        return AuxDef(name, ex.parse_expr(source))

    auxiliaries = [
        aux("liquidity_factor", "clamp((Cash - reserve_cash) / liquidity_buffer, 0, 1)"),
        aux("legacy_output",
            "min(LegacyMachines * output_per_legacy_machine, LegacyStaff * output_per_legacy_worker)"),
        aux("i40_output",
            "min(I40InUse * output_per_i40_machine, I40Staff * output_per_i40_worker)"),
        aux("i40_share", "i40_output / (i40_output + legacy_output)"),
        aux("demand", "base_demand * (1 + value_uplift * i40_share)"),
        aux("sales", "min(legacy_output + i40_output, demand)"),
        aux("sales_legacy", "sales * (1 - i40_share)"),
        aux("sales_i40", "sales * i40_share"),
        aux("production_cost", "unit_cost_legacy * sales_legacy + unit_cost_i40 * sales_i40"),
        aux("payroll", "wage_legacy * LegacyStaff + wage_i40 * I40Staff"),
        aux("storage", "storage_cost * I40Idle"),
        aux("acquisition_rate", "policy_acquisition_rate * liquidity_factor"),
        aux("hiring_rate", "policy_hire_rate * liquidity_factor"),
        aux("dismissal_rate", "min(policy_dismiss_rate, LegacyStaff)"),
    ]

    def flow(name: str, from_: str, to: str, rate: str) -> FlowDef:
        return FlowDef(name, from_, to, ex.parse_expr(rate))

    flows = [
        flow("acquisition", BOUNDARY, "I40Idle", "acquisition_rate"),
        flow("commissioning", "I40Idle", "I40InUse",
             "min(I40Idle, max(0, I40Staff / staff_per_i40_machine - I40InUse)) / commissioning_time"),
        flow("legacy_retirement", "LegacyMachines", BOUNDARY, "LegacyMachines / legacy_life"),
        flow("hiring", BOUNDARY, "I40Staff", "hiring_rate"),
        flow("dismissal", "LegacyStaff", BOUNDARY, "dismissal_rate"),
        flow("net_cash", BOUNDARY, "Cash",
             "price * sales - production_cost - payroll"
             " - machine_price * acquisition_rate - storage"
             " - hire_cost * hiring_rate - severance_cost * dismissal_rate - fixed_costs"),
    ]

    events = [
        EventDef(BANKRUPTCY, ex.parse_expr("0 - Cash"), ">0"),
        EventDef(CROSSOVER, ex.parse_expr("I40Staff - LegacyStaff"), ">=0"),
        EventDef(COMPLETION, ex.parse_expr(f"i40_share - {1.0 - COMPLETION_LEGACY_SHARE}"), ">0"),
    ]

    return ModelSpec(
        name="i4-transition",
        time=TimeConfig(start, stop, dt),
        stocks=stocks,
        flows=flows,
        auxiliaries=auxiliaries,
        parameters=parameters,
        events=events,
    )


# ---------------------------------------------------------------------------
# KPIs


@dataclass
class KPIReport:
    times: list[float]
    blended_unit_cost: list[Optional[float]]  # CHF/unit, None where sales = 0
    staff_legacy: list[float]
    staff_i40: list[float]
    i40_share: list[float]
    cash: list[float]
    net_cash_flow: list[float]
    crossover_time: Optional[float]
    bankruptcy_time: Optional[float]
    transition_completion: Optional[float]

    @property
    def terminal_cash(self) -> float:
        return self.cash[-1]

    def mean_unit_cost(self) -> Optional[float]:
        defined = [v for v in self.blended_unit_cost if v is not None]
        if not defined:
            return None
        return sum(defined) / len(defined)

    def as_dict(self) -> dict:
        return {
            "times": self.times,
            "blended_unit_cost": self.blended_unit_cost,
            "staff_legacy": self.staff_legacy,
            "staff_i40": self.staff_i40,
            "i40_share": self.i40_share,
            "cash": self.cash,
            "net_cash_flow": self.net_cash_flow,
            "crossover_time": self.crossover_time,
            "bankruptcy_time": self.bankruptcy_time,
            "transition_completion": self.transition_completion,
            "terminal_cash": self.terminal_cash,
        }


_REQUIRED_SERIES = (
    "Cash", "LegacyStaff", "I40Staff", "i40_share",
    "production_cost", "payroll", "sales", "net_cash",
)


def compute_kpis(traj: Trajectory, s: TransitionScenario) -> KPIReport:
    for name in _REQUIRED_SERIES:
        if name not in traj.series:
            raise MissingSeriesError(name)
    sales = traj.series["sales"]
    cost = traj.series["production_cost"]
    payroll = traj.series["payroll"]
    blended = [
        ((cost[i] + payroll[i]) / sales[i]) if sales[i] != 0.0 else None
        for i in range(len(sales))
    ]
    return KPIReport(
        times=list(traj.times),
        blended_unit_cost=blended,
        staff_legacy=list(traj.series["LegacyStaff"]),
        staff_i40=list(traj.series["I40Staff"]),
        i40_share=list(traj.series["i40_share"]),
        cash=list(traj.series["Cash"]),
        net_cash_flow=list(traj.series["net_cash"]),
        crossover_time=traj.event_time(CROSSOVER),
        bankruptcy_time=traj.event_time(BANKRUPTCY),
        transition_completion=traj.event_time(COMPLETION),
    )


def run_baseline(cfg: SimConfig = SimConfig()) -> tuple[Trajectory, KPIReport]:
    s = default_scenario()
    traj = simulate(build_transition_model(s), cfg)
    return traj, compute_kpis(traj, s)
