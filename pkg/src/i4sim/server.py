"""Flight-simulator session server.

Holds live runs in memory; each step pins the three policy rates for one
period and advances the simulation.  A stepped run with constant decisions
reproduces the batch run bit-for-bit: segments resume from the exact final
state and global step index of the previous one.

Concurrency: sessions are independent; within a session at most one step
is in flight (concurrent steps get 409 CONFLICT), reads see a consistent
snapshot.
"""

from __future__ import annotations

import json
import threading
import uuid
from pathlib import Path
from typing import Optional

import numpy as np
from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel, Field

from .engine import Integrator, SimConfig, Trajectory, simulate
from .errors import I4SimError, InvalidScenarioError
from .transition import (
    DEFAULT_DT,
    HORIZON_MONTHS,
    TransitionScenario,
    build_transition_model,
    compute_kpis,
    scenario_from_dict,
)

# lever bounds advertised to clients; decisions outside are rejected
DECISION_BOUNDS = {
    "acquisition_rate": (0.0, 10.0),
    "hire_rate": (0.0, 20.0),
    "dismiss_rate": (0.0, 20.0),
}

STOCKS = ("Cash", "LegacyMachines", "I40Idle", "I40InUse", "LegacyStaff", "I40Staff")


class CreateSessionRequest(BaseModel):
    overrides: dict[str, float] = Field(default_factory=dict)
    seed: Optional[int] = None
    stop: Optional[float] = None  # horizon override, months
    dt: Optional[float] = None
    integrator: str = "rk4"


class DecisionRequest(BaseModel):
    period_start: float
    duration: float
    acquisition_rate: float
    hire_rate: float
    dismiss_rate: float


class SessionStateModel(BaseModel):
    id: str
    status: str
    clock: float
    stocks: dict[str, float]
    net_cash_flow: Optional[float]
    blended_unit_cost: Optional[float]
    i40_share: float
    time: dict[str, float]
    decision_bounds: dict[str, tuple[float, float]]
    events: list[dict]


class StepResponse(BaseModel):
    state: SessionStateModel
    kpis: dict


class Session:
    def __init__(self, req: CreateSessionRequest, journal_path: Optional[Path] = None):
        try:
            self.scenario = scenario_from_dict(req.overrides)
        except InvalidScenarioError as e:
            raise HTTPException(status_code=422, detail={"code": "INVALID_SCENARIO", "message": str(e)})
        self.stop = req.stop if req.stop is not None else HORIZON_MONTHS
        self.dt = req.dt if req.dt is not None else DEFAULT_DT
        self.cfg = SimConfig(integrator=Integrator(req.integrator))
        if req.seed is not None:
            rng = np.random.default_rng(req.seed)
            self.id = uuid.UUID(int=int(rng.integers(0, 2**63)) << 64 | int(rng.integers(0, 2**63))).hex
        else:
            self.id = uuid.uuid4().hex
        self.lock = threading.Lock()
        self.step_index = 0
        self.decisions: list[dict] = []
        self.events: list[tuple[str, float]] = []
        self.status = "RUNNING"
        self.journal_path = journal_path

        # initial sample: run a zero-length segment to record t = start
        model = self._model(self.scenario)
        traj = simulate(model, self.cfg, n_steps=0)
        self.state = dict(traj.metadata["final_state"])
        self.times = list(traj.times)
        self.series = {k: list(v) for k, v in traj.series.items()}
        self._absorb_events(traj)
        if self.journal_path:
            self._journal({"create": req.model_dump()})

    # -- helpers

    def _model(self, scenario: TransitionScenario):
        return build_transition_model(scenario, stop=self.stop, dt=self.dt)

    def _journal(self, record: dict):
        with open(self.journal_path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(record) + "\n")

    def _absorb_events(self, traj: Trajectory):
        seen = {name for name, _ in self.events}
        for name, t in traj.events:
            if name not in seen:
                self.events.append((name, t))
                seen.add(name)

    @property
    def clock(self) -> float:
        return self.times[-1]

    def _update_status(self):
        if any(name == "BANKRUPTCY" for name, _ in self.events):
            self.status = "BANKRUPT"
        elif self.step_index * self.dt >= self.stop - 1e-9:
            self.status = "COMPLETED"

    # -- operations

    def apply(self, decision: DecisionRequest):
        if self.status != "RUNNING":
            raise HTTPException(status_code=409, detail={"code": "SESSION_ENDED", "status": self.status})
        if abs(decision.period_start - self.clock) > 1e-9:
            raise HTTPException(
                status_code=422,
                detail={"code": "BAD_PERIOD_START",
                        "message": f"period_start {decision.period_start} != clock {self.clock}"},
            )
        steps = decision.duration / self.dt
        if decision.duration <= 0 or abs(steps - round(steps)) > 1e-9:
            raise HTTPException(
                status_code=422,
                detail={"code": "BAD_DURATION",
                        "message": f"duration must be a positive multiple of dt={self.dt}"},
            )
        for lever, (lo, hi) in DECISION_BOUNDS.items():
            v = getattr(decision, lever)
            if not lo <= v <= hi:
                raise HTTPException(
                    status_code=422,
                    detail={"code": "DECISION_OUT_OF_BOUNDS",
                            "message": f"{lever}={v} outside [{lo}, {hi}]"},
                )
        n = int(round(steps))
        remaining = int(round((self.stop - self.clock) / self.dt))
        n = min(n, remaining)
        scenario = self.scenario.replace(
            policy_acquisition_rate=decision.acquisition_rate,
            policy_hire_rate=decision.hire_rate,
            policy_dismiss_rate=decision.dismiss_rate,
        )
        cash_before = self.state["Cash"]
        traj = simulate(
            self._model(scenario), self.cfg,
            initial_state=self.state, step_offset=self.step_index, n_steps=n,
        )
        # first sample duplicates the current clock
        self.times.extend(traj.times[1:])
        for name, vals in traj.series.items():
            self.series[name].extend(vals[1:])
        self.state = dict(traj.metadata["final_state"])
        self.step_index += n
        self._absorb_events(traj)
        self.decisions.append(
            {
                "period_start": decision.period_start,
                "duration": n * self.dt,
                "acquisition_rate": decision.acquisition_rate,
                "hire_rate": decision.hire_rate,
                "dismiss_rate": decision.dismiss_rate,
            }
        )
        self._update_status()
        if self.journal_path:
            self._journal({"decision": decision.model_dump()})
        return {
            "cash_delta": self.state["Cash"] - cash_before,
            "net_cash_flow": self.series["net_cash"][-1],
            "blended_unit_cost": self._blended_last(),
            "i40_share": self.series["i40_share"][-1],
            "events_this_period": [
                {"name": name, "time": t} for name, t in traj.events
            ],
        }

    def _blended_last(self) -> Optional[float]:
        sales = self.series["sales"][-1]
        if sales == 0.0:
            return None
        return (self.series["production_cost"][-1] + self.series["payroll"][-1]) / sales

    def snapshot(self) -> SessionStateModel:
        return SessionStateModel(
            id=self.id,
            status=self.status,
            clock=self.clock,
            stocks={name: self.state[name] for name in STOCKS},
            net_cash_flow=self.series["net_cash"][-1],
            blended_unit_cost=self._blended_last(),
            i40_share=self.series["i40_share"][-1],
            time={"start": 0.0, "stop": self.stop, "dt": self.dt},
            decision_bounds=DECISION_BOUNDS,
            events=[{"name": name, "time": t} for name, t in self.events],
        )

    def trajectory(self) -> dict:
        traj = Trajectory(
            times=list(self.times),
            series={k: list(v) for k, v in self.series.items()},
            events=list(self.events),
            metadata={
                "model": "i4-transition",
                "config": self.cfg.as_dict(),
                "decisions": list(self.decisions),
            },
        )
        return traj.as_dict()

    def kpis(self) -> dict:
        traj = Trajectory(
            times=list(self.times), series=self.series, events=list(self.events), metadata={}
        )
        return compute_kpis(traj, self.scenario).as_dict()


def replay_journal(path: Path) -> Session:
    """Rebuild a session from its append-only journal."""
    with open(path, encoding="utf-8") as fh:
        records = [json.loads(line) for line in fh if line.strip()]
    if not records or "create" not in records[0]:
        raise ValueError(f"{path}: journal must start with a create record")
    session = Session(CreateSessionRequest(**records[0]["create"]))
    for record in records[1:]:
        session.apply(DecisionRequest(**record["decision"]))
    return session


def create_app(journal_dir: Optional[Path] = None) -> FastAPI:
    app = FastAPI(title="i4sim flight simulator", version="0.1.0")
    # desk tool on loopback; let a locally served frontend talk to it
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )
    sessions: dict[str, Session] = {}

    def get(session_id: str) -> Session:
        session = sessions.get(session_id)
        if session is None:
            raise HTTPException(status_code=404, detail={"code": "SESSION_NOT_FOUND"})
        return session

    @app.post("/sessions", response_model=SessionStateModel)
    def create_session(req: CreateSessionRequest):
        if journal_dir is not None:
            Path(journal_dir).mkdir(parents=True, exist_ok=True)
        try:
            session = Session(req)
        except I4SimError as e:
            raise HTTPException(status_code=422, detail={"code": "INVALID_SCENARIO", "message": str(e)})
        if journal_dir is not None:
            session.journal_path = Path(journal_dir) / f"{session.id}.jsonl"
            session._journal({"create": req.model_dump()})
        sessions[session.id] = session
        return session.snapshot()

    @app.get("/sessions/{session_id}", response_model=SessionStateModel)
    def get_session(session_id: str):
        session = get(session_id)
        with session.lock:
            return session.snapshot()

    @app.post("/sessions/{session_id}/step", response_model=StepResponse)
    def step(session_id: str, decision: DecisionRequest):
        session = get(session_id)
        if not session.lock.acquire(blocking=False):
            raise HTTPException(status_code=409, detail={"code": "CONFLICT"})
        try:
            kpis = session.apply(decision)
            return StepResponse(state=session.snapshot(), kpis=kpis)
        finally:
            session.lock.release()

    @app.get("/sessions/{session_id}/trajectory")
    def get_trajectory(session_id: str):
        session = get(session_id)
        with session.lock:
            return session.trajectory()

    @app.get("/sessions/{session_id}/kpis")
    def get_kpis(session_id: str):
        session = get(session_id)
        with session.lock:
            return session.kpis()

    @app.delete("/sessions/{session_id}")
    def delete_session(session_id: str):
        session = get(session_id)
        with session.lock:
            session.status = "ENDED"
        del sessions[session_id]
        return {"id": session_id, "status": "ENDED"}

    return app


app = create_app()
