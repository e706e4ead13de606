"""Model representation: stocks, flows, auxiliaries, parameters, events.

A model document is a UTF-8 JSON object (see `parse_model` /
`serialize_model`).  Rate and auxiliary formulas are expression strings in
the language of `i4sim.expr`.  Feedback is legal only through stocks: the
auxiliary-to-auxiliary dependency graph must be acyclic.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

from . import expr as ex
from .errors import DuplicateNameError, ModelDocumentError

BOUNDARY = "BOUNDARY"


@dataclass(frozen=True)
class StockDef:
    name: str
    initial: float
    units: str = ""
    non_negative: bool = False


@dataclass(frozen=True)
class FlowDef:
    name: str
    from_: str  # stock name or BOUNDARY
    to: str
    rate: ex.Expression


@dataclass(frozen=True)
class AuxDef:
    name: str
    expr: ex.Expression


@dataclass(frozen=True)
class ParamDef:
    value: float
    units: str = ""
    min: float = float("-inf")
    max: float = float("inf")


@dataclass(frozen=True)
class TimeConfig:
    start: float
    stop: float
    dt: float


@dataclass(frozen=True)
class EventDef:
    """A named condition checked at every step; the event is recorded at the

    first time its expression crosses the trigger ( > 0 or >= 0 )."""

    name: str
    expr: ex.Expression
    trigger: str = ">0"  # ">0" or ">=0"


@dataclass
class ModelSpec:
    name: str
    time: TimeConfig
    stocks: list[StockDef] = field(default_factory=list)
    flows: list[FlowDef] = field(default_factory=list)
    auxiliaries: list[AuxDef] = field(default_factory=list)
    parameters: dict[str, ParamDef] = field(default_factory=dict)
    lookups: dict[str, list[tuple[float, float]]] = field(default_factory=dict)
    events: list[EventDef] = field(default_factory=list)

    def stock_names(self) -> list[str]:
        return [s.name for s in self.stocks]

    def variable_names(self) -> list[str]:
        """All recordable variables: stocks, flows, auxiliaries."""
        return (
            [s.name for s in self.stocks]
            + [f.name for f in self.flows]
            + [a.name for a in self.auxiliaries]
        )


@dataclass(frozen=True)
class Diagnostic:
    kind: str
    name: str
    message: str

    def __str__(self):
        return f"{self.kind}({self.name}): {self.message}"

    def as_dict(self):
        return {"kind": self.kind, "name": self.name, "message": self.message}


# ---------------------------------------------------------------------------
# Document parsing / serialization


def parse_model(text: str) -> ModelSpec:
    """Parse a UTF-8 JSON model document.

    Raises ModelDocumentError for malformed documents, DuplicateNameError
    for name collisions, and the expression parser's errors
    (ExpressionSyntaxError, UnknownFunctionError) for bad formulas.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ModelDocumentError(f"malformed JSON: {e.msg}", e.lineno, e.colno) from None
    if not isinstance(doc, dict):
        raise ModelDocumentError("model document must be a JSON object")
    return model_from_dict(doc)


def model_from_dict(doc: dict) -> ModelSpec:
    for key in ("name", "time"):
        if key not in doc:
            raise ModelDocumentError(f"missing required field {key!r}")
    tc = doc["time"]
    try:
        time = TimeConfig(float(tc["start"]), float(tc["stop"]), float(tc["dt"]))
    except (KeyError, TypeError, ValueError) as e:
        raise ModelDocumentError(f"bad time config: {e}") from None

    seen: set[str] = set()

    def claim(name: str):
        if not isinstance(name, str) or not name:
            raise ModelDocumentError(f"bad name {name!r}")
        if name in seen:
            raise DuplicateNameError(name)
        seen.add(name)

    stocks = []
    for s in doc.get("stocks", []):
        claim(s["name"])
        stocks.append(
            StockDef(
                name=s["name"],
                initial=float(s["initial"]),
                units=s.get("units", ""),
                non_negative=bool(s.get("non_negative", False)),
            )
        )
    flows = []
    for f in doc.get("flows", []):
        claim(f["name"])
        flows.append(
            FlowDef(
                name=f["name"],
                from_=f["from"],
                to=f["to"],
                rate=ex.parse_expr(f["rate"]),
            )
        )
    auxiliaries = []
    for a in doc.get("auxiliaries", []):
        claim(a["name"])
        auxiliaries.append(AuxDef(name=a["name"], expr=ex.parse_expr(a["expr"])))
    parameters = {}
    for name, p in doc.get("parameters", {}).items():
        claim(name)
        parameters[name] = ParamDef(
            value=float(p["value"]),
            units=p.get("units", ""),
            min=float(p.get("min", float("-inf"))),
            max=float(p.get("max", float("inf"))),
        )
    lookups = {}
    for name, pts in doc.get("lookups", {}).items():
        lookups[name] = [(float(x), float(y)) for x, y in pts]
    events = []
    for e in doc.get("events", []):
        events.append(
            EventDef(name=e["name"], expr=ex.parse_expr(e["expr"]), trigger=e.get("trigger", ">0"))
        )
    return ModelSpec(
        name=doc["name"],
        time=time,
        stocks=stocks,
        flows=flows,
        auxiliaries=auxiliaries,
        parameters=parameters,
        lookups=lookups,
        events=events,
    )


def _num(v: float):
    return int(v) if v == int(v) and abs(v) < 1e15 else v


def model_to_dict(m: ModelSpec) -> dict:
    doc: dict = {
        "name": m.name,
        "time": {"start": _num(m.time.start), "stop": _num(m.time.stop), "dt": m.time.dt},
        "parameters": {
            name: {
                "value": p.value,
                "units": p.units,
                **({"min": p.min} if p.min != float("-inf") else {}),
                **({"max": p.max} if p.max != float("inf") else {}),
            }
            for name, p in m.parameters.items()
        },
        "stocks": [
            {"name": s.name, "initial": s.initial, "units": s.units, "non_negative": s.non_negative}
            for s in m.stocks
        ],
        "flows": [
            {"name": f.name, "from": f.from_, "to": f.to, "rate": ex.to_source(f.rate)}
            for f in m.flows
        ],
        "auxiliaries": [{"name": a.name, "expr": ex.to_source(a.expr)} for a in m.auxiliaries],
    }
    if m.lookups:
        doc["lookups"] = {name: [[x, y] for x, y in pts] for name, pts in m.lookups.items()}
    if m.events:
        doc["events"] = [
            {"name": e.name, "expr": ex.to_source(e.expr), "trigger": e.trigger} for e in m.events
        ]
    return doc


def serialize_model(m: ModelSpec) -> str:
    """Canonical document text; parse -> serialize -> parse is a fixed point."""
    return json.dumps(model_to_dict(m), indent=2) + "\n"


# ---------------------------------------------------------------------------
# Validation


def validate_model(m: ModelSpec) -> list[Diagnostic]:
    """Return every invariant violation; empty list means valid.

    Ordering is deterministic: sorted by (name, kind, message).
    """
    diags: list[Diagnostic] = []

    # name uniqueness across all categories
    counts: dict[str, int] = {}
    for n in m.variable_names() + list(m.parameters):
        counts[n] = counts.get(n, 0) + 1
    for n, c in counts.items():
        if c > 1:
            diags.append(Diagnostic("DUPLICATE_NAME", n, f"declared {c} times"))
    if ex.TIME in counts:
        diags.append(Diagnostic("RESERVED_NAME", ex.TIME, "'time' is reserved"))

    # flow names are declared but not referenceable: expressions may only
    # resolve stocks, auxiliaries, parameters, and `time`
    known = (set(counts) - {f.name for f in m.flows}) | {ex.TIME}

    # identifier resolution + lookup table references
    def check_refs(owner: str, e: ex.Expression):
        for ident in sorted(ex.identifiers(e)):
            if ident not in known:
                diags.append(
                    Diagnostic("UNRESOLVED_IDENTIFIER", ident, f"referenced by {owner!r}")
                )
        for tbl in sorted(ex.referenced_tables(e)):
            if tbl not in m.lookups:
                diags.append(Diagnostic("UNKNOWN_LOOKUP", tbl, f"referenced by {owner!r}"))
        for call in ex.walk(e):
            if isinstance(call, ex.Call) and call.func == "smooth":
                tau = call.args[1]
                if isinstance(tau, ex.Num) and tau.value <= 0:
                    diags.append(Diagnostic("BAD_SMOOTH_TAU", owner, f"tau = {tau.value}"))

    for f in m.flows:
        check_refs(f.name, f.rate)
    for a in m.auxiliaries:
        check_refs(a.name, a.expr)
    for e in m.events:
        check_refs(e.name, e.expr)

    # flow endpoints
    stock_set = set(m.stock_names())
    for f in m.flows:
        if f.from_ == f.to:
            diags.append(Diagnostic("BAD_FLOW_ENDPOINTS", f.name, "from equals to"))
        elif f.from_ not in stock_set and f.to not in stock_set:
            diags.append(
                Diagnostic("BAD_FLOW_ENDPOINTS", f.name, "neither endpoint is a declared stock")
            )
        else:
            for end in (f.from_, f.to):
                if end != BOUNDARY and end not in stock_set:
                    diags.append(
                        Diagnostic("BAD_FLOW_ENDPOINTS", f.name, f"{end!r} is not a stock")
                    )

    # auxiliary->auxiliary acyclicity
    aux_names = {a.name for a in m.auxiliaries}
    graph = {a.name: sorted(ex.identifiers(a.expr) & aux_names) for a in m.auxiliaries}
    cycle = _find_cycle(graph)
    if cycle:
        diags.append(
            Diagnostic("CYCLE", cycle[0], "auxiliary cycle: " + " -> ".join(cycle))
        )

    # stock initials
    for s in m.stocks:
        if s.non_negative and s.initial < 0:
            diags.append(
                Diagnostic("NEGATIVE_INITIAL", s.name, f"initial {s.initial} < 0 on non-negative stock")
            )

    # time config
    if not (m.time.stop > m.time.start):
        diags.append(Diagnostic("BAD_TIME_CONFIG", m.name, "stop must exceed start"))
    elif not (0 < m.time.dt <= m.time.stop - m.time.start):
        diags.append(Diagnostic("BAD_TIME_CONFIG", m.name, f"dt {m.time.dt} out of range"))

    # parameter bounds
    for name, p in m.parameters.items():
        if not (p.min <= p.value <= p.max):
            diags.append(
                Diagnostic("PARAM_OUT_OF_BOUNDS", name, f"value {p.value} outside [{p.min}, {p.max}]")
            )

    # lookup tables
    for name, pts in m.lookups.items():
        if len(pts) < 2:
            diags.append(Diagnostic("BAD_LOOKUP", name, "needs at least 2 points"))
        elif any(pts[i][0] >= pts[i + 1][0] for i in range(len(pts) - 1)):
            diags.append(Diagnostic("BAD_LOOKUP", name, "x-points must be strictly increasing"))

    diags.sort(key=lambda d: (d.name, d.kind, d.message))
    return diags


def _find_cycle(graph: dict[str, list[str]]) -> Optional[list[str]]:
    """First cycle in a small dependency graph, as a node list, or None."""
    WHITE, GREY, BLACK = 0, 1, 2
    color = {n: WHITE for n in graph}
    stack: list[str] = []

    def visit(n: str) -> Optional[list[str]]:
        color[n] = GREY
        stack.append(n)
        for nb in graph.get(n, ()):
            if nb not in color:
                continue
            if color[nb] == GREY:
                i = stack.index(nb)
                return sorted(stack[i:])
            if color[nb] == WHITE:
                found = visit(nb)
                if found:
                    return found
        stack.pop()
        color[n] = BLACK
        return None

    for n in sorted(graph):
        if color[n] == WHITE:
            found = visit(n)
            if found:
                return found
    return None
