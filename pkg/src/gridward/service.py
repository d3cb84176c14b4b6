"""Session bridge exposing the environment to the operator console.

One session = one live episode plus an assistant agent. The console (or
any client) creates a session, watches the event stream over WebSocket,
asks for the assistant's suggestion (a pure preview: nothing moves, no
budget is spent) and posts steps, either its own action or
"accept-assistant". Alarms spend budget only when the step carrying them
executes.

Events are sequence-numbered per session with no gaps; reconnecting
clients pass ?since=N to resume. Requests within a session are serialized
by a per-session lock; an idempotency key on step requests makes network
retries safe (the stored response is replayed, the episode does not
advance twice).
"""

from __future__ import annotations

import asyncio
import itertools
import json
import threading
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import FastAPI, HTTPException, WebSocket, WebSocketDisconnect
from pydantic import BaseModel

from .agents import BaseAgent, make_agent
from .environment import (
    Action,
    Alarm,
    EnvParams,
    GridEnv,
    Observation,
    topology_distance,
)
from .episode_log import write_episode_log
from .grid_model import GridCase
from .runner import resolve_case, resolve_scenario

MODES = ("human-drives", "assistant-drives")


class CreateSessionRequest(BaseModel):
    case: str = "toy5"
    scenario: dict | str = "week_flat"
    seed: int = 0
    assistant: str = "sie+rba2"
    mode: str = "human-drives"
    opponent: bool = True


class StepRequest(BaseModel):
    source: str                      # "human" | "accept-assistant"
    action: dict | None = None
    alarm: dict | None = None        # {"zones": [...]}
    idempotency_key: str | None = None


@dataclass
class Session:
    id: str
    env: GridEnv
    agent: BaseAgent
    mode: str
    case_ref: str
    scenario_ref: dict
    lock: threading.Lock = field(default_factory=threading.Lock)
    events: list[dict] = field(default_factory=list)
    seq: int = 0
    closed: bool = False
    last_activity: float = field(default_factory=time.monotonic)
    idempotency: dict[str, dict] = field(default_factory=dict)

    def push_event(self, kind: str, payload: dict) -> dict:
        self.seq += 1
        event = {"seq": self.seq, "type": kind, "payload": payload}
        self.events.append(event)
        return event


def observation_payload(obs: Observation) -> dict:
    case = obs.case
    busbars: dict[str, dict[str, int]] = {}
    for sub in case.substations:
        busbars[str(sub.id)] = {key: obs.topology.busbar_of_element[key]
                                for key in case.elements_of_sub(sub.id)}
    return {
        "step": obs.step,
        "alpha": obs.attention_budget,
        "max_rho": obs.max_rho(),
        "rho": obs.rho,
        "p_flow": obs.p_flow,
        "line_status": obs.line_status,
        "attacked": sorted(obs.attacked),
        "maintenance": sorted(obs.maintenance_out),
        "sub_cooldown": {str(k): v for k, v in obs.sub_cooldown.items()},
        "line_cooldown": obs.line_cooldown,
        "gen_p": obs.gen_p,
        "gen_target": obs.gen_target,
        "load_p": obs.load_p,
        "busbars": busbars,
        "zones": {str(s.id): s.zone for s in case.substations},
        "topo_distance": topology_distance(obs),
        "unserved": obs.unserved_subs,
        "is_prediction": obs.is_prediction,
    }


def case_payload(case: GridCase, coords: dict | None) -> dict:
    return {
        "name": case.name,
        "zones": [{"index": z.index, "name": z.name} for z in case.zones],
        "substations": [{"id": s.id, "name": s.name, "zone": s.zone}
                        for s in case.substations],
        "lines": [{"id": l.id, "from_sub": l.from_sub, "to_sub": l.to_sub,
                   "thermal_limit": l.thermal_limit} for l in case.lines],
        "generators": [{"id": g.id, "substation": g.substation, "kind": g.kind,
                        "p_min": g.p_min, "p_max": g.p_max, "ramp": g.ramp}
                       for g in case.generators],
        "loads": [{"id": d.id, "substation": d.substation} for d in case.loads],
        "attackable_lines": list(case.attackable_line_ids),
        "elements_of_sub": {str(s.id): case.elements_of_sub(s.id)
                            for s in case.substations},
        "coords": coords or {},
    }


def load_coords(case_ref: str) -> dict | None:
    """Coordinates file authored alongside the case: <stem>_coords.json."""
    from . import data_path
    candidates = []
    path = Path(case_ref)
    if path.suffix == ".json":
        candidates.append(path.with_name(path.stem + "_coords.json"))
    candidates.append(data_path(f"{path.stem}_coords.json"))
    for candidate in candidates:
        if candidate.exists():
            return json.loads(candidate.read_text())
    return None


def suggestion_payload(session: Session) -> dict:
    """Assistant decision preview plus its simulated effect; pure."""
    env = session.env
    obs = env.observation()
    agent = session.agent
    saved_last_alarm = getattr(agent, "last_alarm_step", None)
    decision = agent.decide(obs, env)
    if saved_last_alarm is not None:
        agent.last_alarm_step = saved_last_alarm
    predicted = env.simulate(decision.action)
    return {
        "action": decision.action.to_json(),
        "alarm": sorted(decision.alarm.zones) if decision.alarm else None,
        "predicted_max_rho": predicted.max_rho(),
        "predicted_unserved": predicted.unserved_subs,
        "current_max_rho": obs.max_rho(),
    }


def create_app(session_capacity: int = 32, idle_timeout_s: float = 3600.0,
               logs_dir: str | None = None) -> FastAPI:
    app = FastAPI(title="gridward bridge", version="0.1.0")
    # the operator console is served as a separate static bundle
    from fastapi.middleware.cors import CORSMiddleware
    app.add_middleware(CORSMiddleware, allow_origins=["*"], allow_methods=["*"],
                       allow_headers=["*"])
    sessions: dict[str, Session] = {}
    counter = itertools.count(1)

    def persist(session: Session) -> None:
        if logs_dir is None:
            return
        out = Path(logs_dir)
        out.mkdir(parents=True, exist_ok=True)
        log = session.env.episode_log(agent_name=session.agent.name,
                                      case_ref=session.case_ref,
                                      scenario_ref=session.scenario_ref)
        write_episode_log(log, out / f"session-{session.id}.jsonl")

    def sweep_idle() -> None:
        now = time.monotonic()
        for sid in list(sessions):
            session = sessions[sid]
            if now - session.last_activity > idle_timeout_s:
                persist(session)
                sessions.pop(sid, None)

    def get_session(session_id: str) -> Session:
        session = sessions.get(session_id)
        if session is None:
            raise HTTPException(status_code=404, detail="session not found")
        session.last_activity = time.monotonic()
        return session

    @app.post("/sessions")
    def create_session(body: CreateSessionRequest):
        sweep_idle()
        if len(sessions) >= session_capacity:
            raise HTTPException(status_code=503, detail="session capacity exceeded")
        if body.mode not in MODES:
            raise HTTPException(status_code=400, detail=f"mode must be one of {MODES}")
        try:
            case = resolve_case(body.case)
            ref = body.scenario if isinstance(body.scenario, dict) \
                else {"kind": "file", "path": body.scenario}
            scenario = resolve_scenario(ref, case)
            agent = make_agent(body.assistant, case)
        except (FileNotFoundError, ValueError) as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        env = GridEnv(case, scenario,
                      params=EnvParams(opponent_enabled=body.opponent),
                      seed=body.seed)
        obs = env.reset()
        agent.reset()
        session = Session(id=f"s{next(counter)}-{uuid.uuid4().hex[:8]}",
                          env=env, agent=agent, mode=body.mode,
                          case_ref=body.case, scenario_ref=ref)
        sessions[session.id] = session
        session.push_event("step", {"observation": observation_payload(obs),
                                    "info": {"initial": True}})
        return {"session_id": session.id,
                "mode": session.mode,
                "observation": observation_payload(obs),
                "case": case_payload(case, load_coords(body.case))}

    @app.get("/sessions/{session_id}/observation")
    def get_observation(session_id: str):
        session = get_session(session_id)
        with session.lock:
            return observation_payload(session.env.observation())

    @app.get("/sessions/{session_id}/case")
    def get_case(session_id: str):
        session = get_session(session_id)
        return case_payload(session.env.case, load_coords(session.case_ref))

    @app.get("/sessions/{session_id}/suggestion")
    def get_suggestion(session_id: str):
        session = get_session(session_id)
        with session.lock:
            if session.env.finished:
                raise HTTPException(status_code=409, detail="episode finished")
            return suggestion_payload(session)

    @app.post("/sessions/{session_id}/step")
    def step_session(session_id: str, body: StepRequest):
        session = get_session(session_id)
        with session.lock:
            if body.idempotency_key and body.idempotency_key in session.idempotency:
                return session.idempotency[body.idempotency_key]
            if session.env.finished:
                raise HTTPException(status_code=409, detail="episode finished")

            if body.source == "accept-assistant":
                decision = session.agent.decide(session.env.observation(), session.env)
                action, alarm = decision.action, decision.alarm
            elif body.source == "human":
                if session.mode != "human-drives":
                    raise HTTPException(status_code=400,
                                        detail="session is assistant-driven")
                try:
                    action = Action.from_json(body.action or {})
                    alarm = Alarm.for_zones(body.alarm["zones"]) \
                        if body.alarm else None
                except (ValueError, KeyError, TypeError) as exc:
                    raise HTTPException(status_code=400,
                                        detail=f"malformed action: {exc}") from exc
            else:
                raise HTTPException(status_code=400,
                                    detail="source must be human or accept-assistant")

            env = session.env
            obs, info = env.step(action, alarm)
            step_event = session.push_event("step", {
                "observation": observation_payload(obs),
                "info": {
                    "legal": info.legal,
                    "illegal_reasons": info.illegal_reasons,
                    "alarm_rejected": info.alarm_rejected,
                    "tripped": info.tripped,
                    "done": info.done,
                },
            })
            if alarm is not None and not info.alarm_rejected:
                session.push_event("alarm", {"zones": sorted(alarm.zones),
                                             "step": obs.step,
                                             "alpha": obs.attention_budget})
            if info.new_attack is not None:
                session.push_event("attack", {
                    "line": info.new_attack.line,
                    "start_step": info.new_attack.start_step,
                    "duration_steps": info.new_attack.duration_steps})
            if info.done:
                game_over = info.game_over
                session.push_event("gameover", {
                    "outcome": "failed" if game_over else "survived",
                    "t_bar": game_over.t_bar if game_over else None,
                    "failure_zone": game_over.failure_zone if game_over else None,
                    "cause": game_over.cause if game_over else None,
                })
                session.closed = True
                persist(session)
            response = {"event": step_event, "seq": session.seq}
            if body.idempotency_key:
                session.idempotency[body.idempotency_key] = response
            return response

    @app.delete("/sessions/{session_id}")
    def delete_session(session_id: str):
        session = get_session(session_id)
        with session.lock:
            persist(session)
            sessions.pop(session_id, None)
        return {"deleted": session_id}

    @app.websocket("/sessions/{session_id}/events")
    async def events(websocket: WebSocket, session_id: str):
        await websocket.accept()
        session = sessions.get(session_id)
        if session is None:
            await websocket.send_json({"seq": 0, "type": "error",
                                       "payload": {"detail": "session not found"}})
            await websocket.close()
            return
        try:
            since = int(websocket.query_params.get("since", 0))
        except ValueError:
            since = 0
        cursor = since
        try:
            while True:
                events_list = session.events
                while cursor < len(events_list):
                    event = events_list[cursor]
                    cursor += 1
                    if event["seq"] <= since:
                        continue
                    await websocket.send_json(event)
                    if event["type"] == "gameover":
                        await websocket.close()
                        return
                if session.closed and cursor >= len(session.events):
                    await websocket.close()
                    return
                await asyncio.sleep(0.05)
        except WebSocketDisconnect:
            return

    return app
