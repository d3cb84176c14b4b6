"""Sequential decision loop over the grid.

One GridEnv instance runs one episode: reset() consumes chronics row 0 as
step 0, each step() consumes the next row, applying in order the agent's
action (illegal actions become do-nothing with a flag), opponent and
maintenance outages, the cascade engine, and finally the attention-budget
update. The episode ends at the first step with unserved load (game over,
with the failure zone attributed to the substation losing the most load)
or after the last chronics row (survived).

Forced outages (attack, maintenance) are an overlay on the agent-intent
line status: the attacked line is effectively out for exactly the attack
duration and snaps back afterwards unless the agent disconnected it or an
overload tripped it meanwhile. Only overload trips start the long
reconnection cooldown.

All randomness flows from the reset seed through named sub-streams, so a
(case, scenario, seed, action sequence) tuple reproduces an episode
bit-exactly; every step record carries a state hash that replay verifies.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .chronics import Scenario
from .episode_log import FORMAT_VERSION, EpisodeLog, StepRecord, TerminalRecord
from .grid_model import (
    CONNECTED,
    DISCONNECTED,
    GridCase,
    Topology,
    TopologyAction,
    apply_topology,
)
from .opponent import (
    AttackEvent,
    OpponentState,
    init_opponent,
    step_opponent,
)
from .power_flow import (
    CascadeResult,
    FlowSolution,
    Injections,
    OverloadTimers,
    losses_proxy,
    run_cascade,
    simulate_n1,
    solve_dc,
)

STEPS_PER_DAY = 288
REDISPATCH_TOL = 1e-6  # MW slack before a request counts as out of bounds


class EnvError(RuntimeError):
    pass


@dataclass
class EnvParams:
    """All tunable environment constants, centralized for recalibration."""

    substation_cooldown_steps: int = 3        # once per 15 minutes per asset
    line_failure_cooldown_steps: int = 288    # one day before reconnection
    overload_trip_steps: int = 3              # 15 minutes above rho 1
    hard_overload_rho: float = 2.0
    max_substations_changed_per_step: int = 1
    kappa: float = 1.0                        # alarm cost
    mu_per_day: float = 1.5                   # budget regeneration per day
    budget_cap: float = 3.0                   # A
    t_opt_steps: int = 7                      # 35 minutes
    t_width_steps: int = 5                    # 25 minutes
    opponent_enabled: bool = True

    def __post_init__(self):
        numeric = [self.substation_cooldown_steps, self.line_failure_cooldown_steps,
                   self.overload_trip_steps, self.hard_overload_rho,
                   self.max_substations_changed_per_step, self.kappa,
                   self.mu_per_day, self.budget_cap, self.t_opt_steps,
                   self.t_width_steps]
        if any(v <= 0 for v in numeric):
            raise ValueError("all EnvParams constants must be positive")
        if self.t_width_steps >= self.t_opt_steps:
            raise ValueError("t_width_steps must be smaller than t_opt_steps")

    @property
    def regen_per_step(self) -> float:
        return self.mu_per_day / STEPS_PER_DAY


@dataclass
class Action:
    set_busbars: dict[str, int] = field(default_factory=dict)
    set_line_status: dict[str, str] = field(default_factory=dict)
    redispatch: dict[str, float] = field(default_factory=dict)
    curtail: dict[str, float] = field(default_factory=dict)

    def is_do_nothing(self) -> bool:
        return not (self.set_busbars or self.set_line_status
                    or self.redispatch or self.curtail)

    def touched_substations(self, case: GridCase) -> set[int]:
        return {case.sub_of_element(key) for key in self.set_busbars}

    def to_json(self) -> dict:
        out: dict = {}
        if self.set_busbars:
            out["set_busbars"] = dict(self.set_busbars)
        if self.set_line_status:
            out["set_line_status"] = dict(self.set_line_status)
        if self.redispatch:
            out["redispatch"] = dict(self.redispatch)
        if self.curtail:
            out["curtail"] = dict(self.curtail)
        return out

    @classmethod
    def from_json(cls, raw: dict) -> Action:
        unknown = set(raw) - {"set_busbars", "set_line_status", "redispatch", "curtail"}
        if unknown:
            raise ValueError(f"unknown action keys {sorted(unknown)}")
        return cls(
            set_busbars={k: int(v) for k, v in raw.get("set_busbars", {}).items()},
            set_line_status=dict(raw.get("set_line_status", {})),
            redispatch={k: float(v) for k, v in raw.get("redispatch", {}).items()},
            curtail={k: float(v) for k, v in raw.get("curtail", {}).items()},
        )


DO_NOTHING = Action()


@dataclass(frozen=True)
class Alarm:
    zones: frozenset[int]
    step_raised: int = -1

    def __post_init__(self):
        if not self.zones:
            raise ValueError("alarm must name at least one zone")
        if not self.zones <= {0, 1, 2}:
            raise ValueError(f"unknown zones in alarm: {sorted(self.zones)}")

    @classmethod
    def for_zones(cls, zones) -> Alarm:
        return cls(zones=frozenset(int(z) for z in zones))


@dataclass
class GameOverInfo:
    t_bar: int
    failure_zone: int
    cause: str  # cascade | islanded load | non-convergence


def budget_update(alpha: float, alarm_attempted: bool,
                  params: EnvParams) -> tuple[float, bool]:
    """One step of the attention-budget automaton: an attempted alarm is
    accepted iff alpha >= kappa and then costs kappa; every other step
    (including rejected attempts) regenerates mu/288 up to the cap.
    Returns (alpha', accepted)."""
    if alarm_attempted and alpha >= params.kappa:
        return alpha - params.kappa, True
    return min(params.budget_cap, alpha + params.regen_per_step), False


@dataclass
class LegalityVerdict:
    legal: bool
    reasons: list[str] = field(default_factory=list)

    def __bool__(self) -> bool:
        return self.legal


@dataclass
class Observation:
    """Full system state visible to agents at one step."""

    step: int
    rho: dict[str, float]
    p_flow: dict[str, float]
    line_status: dict[str, str]          # effective (forced outages applied)
    attacked: set[str]
    maintenance_out: set[str]
    sub_cooldown: dict[int, int]
    line_cooldown: dict[str, int]
    gen_p: dict[str, float]              # actual output incl. slack absorption
    gen_target: dict[str, float]         # schedule + cumulative redispatch
    load_p: dict[str, float]
    unserved_subs: list[int]             # substations with load cut off
    topology: Topology                   # agent-intent statuses and busbars
    attention_budget: float
    last_attack_step: int | None
    last_maintenance_step: int | None
    case: GridCase
    is_prediction: bool = False

    def max_rho(self) -> float:
        return max(self.rho.values(), default=0.0)

    def overloaded_lines(self) -> list[str]:
        return [lid for lid, r in self.rho.items() if r > 1.0]


@dataclass
class StepInfo:
    legal: bool
    illegal_reasons: list[str]
    alarm_rejected: bool
    tripped: list[str]
    new_attack: AttackEvent | None
    done: bool
    game_over: GameOverInfo | None


def check_legal(obs: Observation, action: Action,
                params: EnvParams | None = None) -> LegalityVerdict:
    """Action legality against the observed state; a verdict, never a crash."""
    params = params or EnvParams()
    case = obs.case
    reasons: list[str] = []

    unknown_elems = [k for k in action.set_busbars if k not in obs.topology.busbar_of_element]
    if unknown_elems:
        reasons.append(f"unknown elements {unknown_elems}")
    bad_busbars = [k for k, b in action.set_busbars.items() if b not in (1, 2)]
    if bad_busbars:
        reasons.append(f"busbar must be 1 or 2 for {bad_busbars}")
    unknown_lines = [k for k in action.set_line_status if k not in obs.topology.line_status]
    if unknown_lines:
        reasons.append(f"unknown lines {unknown_lines}")

    if not reasons:
        touched_subs = action.touched_substations(case)
        if len(touched_subs) > params.max_substations_changed_per_step:
            reasons.append(
                f"max {params.max_substations_changed_per_step} substation "
                f"reconfiguration per step (got {len(touched_subs)})")
        for sub in sorted(touched_subs):
            if obs.sub_cooldown.get(sub, 0) > 0:
                reasons.append(f"substation {sub} in cooldown "
                               f"({obs.sub_cooldown[sub]} steps left)")
        for line_id, status in action.set_line_status.items():
            if status not in (CONNECTED, DISCONNECTED):
                reasons.append(f"bad status '{status}' for line {line_id}")
                continue
            if obs.line_cooldown.get(line_id, 0) > 0:
                reasons.append(f"line {line_id} in cooldown "
                               f"({obs.line_cooldown[line_id]} steps left)")
            if status == CONNECTED and line_id in obs.attacked:
                reasons.append(f"line {line_id} is under attack")

    for gen_id, delta in action.redispatch.items():
        gen = case.gen_by_id.get(gen_id)
        if gen is None:
            reasons.append(f"unknown generator {gen_id}")
            continue
        if gen.kind != "dispatchable":
            reasons.append(f"generator {gen_id} is not dispatchable")
            continue
        if not math.isfinite(delta):
            reasons.append(f"non-finite redispatch for {gen_id}")
            continue
        if abs(delta) > gen.ramp + REDISPATCH_TOL:
            reasons.append(f"redispatch {delta:+.2f} MW on {gen_id} exceeds "
                           f"ramp {gen.ramp} MW/step")
        target = obs.gen_target.get(gen_id, 0.0) + delta
        if target < gen.p_min - REDISPATCH_TOL or target > gen.p_max + REDISPATCH_TOL:
            reasons.append(f"redispatch on {gen_id} leaves target {target:.2f} MW "
                           f"outside [{gen.p_min}, {gen.p_max}]")

    for gen_id, cap in action.curtail.items():
        gen = case.gen_by_id.get(gen_id)
        if gen is None:
            reasons.append(f"unknown generator {gen_id}")
            continue
        if gen.kind == "dispatchable":
            reasons.append(f"generator {gen_id} is not curtailable")
        elif cap < 0 or not math.isfinite(cap):
            reasons.append(f"curtailment cap for {gen_id} must be >= 0")

    return LegalityVerdict(legal=not reasons, reasons=reasons)


def determine_failure_zone(case: GridCase, cascade: CascadeResult) -> int:
    """Zone of the substation losing the most load; ties break low."""
    if not cascade.load_lost:
        raise ValueError("no load was lost")
    best_sub = None
    best = (-1.0, None)
    for sub, lost in cascade.lost_load_mw.items():
        zone = case.zone_of_sub(sub)
        key = (lost, -zone)
        if key > best:
            best = key
            best_sub = sub
    return case.zone_of_sub(best_sub)


def topology_distance(obs: Observation) -> int:
    """Deviations from reference: moved elements plus agent-intent line
    status changes. Attack/maintenance forced outages do not count."""
    ref = obs.case.reference_topology
    moved = sum(1 for key, bus in obs.topology.busbar_of_element.items()
                if bus != ref.busbar_of_element[key])
    switched = sum(1 for lid, status in obs.topology.line_status.items()
                   if status != ref.line_status[lid])
    return moved + switched


class GridEnv:
    """One environment instance = one episode, driven by a single caller."""

    def __init__(self, case: GridCase, scenario: Scenario,
                 params: EnvParams | None = None, seed: int = 0,
                 attack_schedule: list[tuple[int, int]] | None = None):
        if set(scenario.load_ids) != {d.id for d in case.loads}:
            raise EnvError("scenario loads do not match case")
        if set(scenario.gen_ids) != {g.id for g in case.generators}:
            raise EnvError("scenario generators do not match case")
        self.case = case
        self.scenario = scenario
        self.params = params or EnvParams()
        self.seed = seed
        self.attack_schedule = attack_schedule
        self.finished = False
        self.game_over: GameOverInfo | None = None
        self._obs: Observation | None = None

    # ------------------------------------------------------------ lifecycle

    def reset(self) -> Observation:
        case = self.case
        self.step_index = 0
        self.topology = case.reference_topology.copy()
        self.timers = OverloadTimers.zeros(case)
        self.sub_cooldown = {s.id: 0 for s in case.substations}
        self.line_cooldown = {l.id: 0 for l in case.lines}
        self.redispatch = {g.id: 0.0 for g in case.generators if g.kind == "dispatchable"}
        self.curtail_cap: dict[str, float] = {}
        self.alpha = self.params.budget_cap
        self.finished = False
        self.game_over = None
        self.last_attack_step: int | None = None
        self.last_maintenance_step: int | None = None
        self.alarms: list[tuple[int, list[int]]] = []

        opp_seq, _reserved = np.random.SeedSequence(self.seed).spawn(2)
        self.opponent: OpponentState | None = None
        if self.params.opponent_enabled:
            self.opponent = init_opponent(_seed_of(opp_seq),
                                          pinned_schedule=self.attack_schedule)

        self.attacked: set[str] = set()
        self.maintenance: set[str] = self.scenario.maintenance_out(0)
        if self.maintenance:
            self.last_maintenance_step = 0

        inj, curtailed = self._build_injections(0)
        sol = solve_dc(case, self.topology, inj, self._forced_out())
        self._obs = self._make_observation(0, sol, inj)
        self.records: list[StepRecord] = []
        self._append_record(action=DO_NOTHING, alarm=None, alarm_rejected=False,
                            tripped=[], legal=True, reasons=[], sol=sol,
                            curtailed=curtailed, inj=inj, new_attack=None)
        return self._obs

    def step(self, action: Action, alarm: Alarm | None = None
             ) -> tuple[Observation, StepInfo]:
        if self.finished:
            raise EnvError("episode is finished")
        if self._obs is None:
            raise EnvError("call reset() first")
        case = self.case
        params = self.params
        t = self.step_index + 1

        verdict = check_legal(self._obs, action, params)
        applied = action if verdict.legal else DO_NOTHING

        if not applied.is_do_nothing():
            self.topology = apply_topology(
                self.topology, TopologyAction(set_busbars=applied.set_busbars,
                                              set_line_status=applied.set_line_status))
            for sub in applied.touched_substations(case):
                self.sub_cooldown[sub] = params.substation_cooldown_steps
            for lid in applied.set_line_status:
                self.line_cooldown[lid] = params.substation_cooldown_steps
            for gen_id, delta in applied.redispatch.items():
                gen = case.gen_by_id[gen_id]
                self.redispatch[gen_id] += float(np.clip(delta, -gen.ramp, gen.ramp))
            for gen_id, cap in applied.curtail.items():
                self.curtail_cap[gen_id] = cap

        new_attack = self._step_opponent(t)
        self.maintenance = self.scenario.maintenance_out(t)
        if self.maintenance:
            self.last_maintenance_step = t

        inj, curtailed = self._build_injections(t)
        cascade, self.timers = run_cascade(
            case, self.topology, inj, self.timers, self._forced_out(),
            hard_overload_rho=params.hard_overload_rho,
            overload_trip_steps=params.overload_trip_steps)
        self.topology = cascade.topology_after
        for lid in cascade.tripped_lines:
            self.line_cooldown[lid] = params.line_failure_cooldown_steps

        # one decrement per step: a cooldown of N set at step t blocks steps
        # t+1 .. t+N-1, so the asset can be touched again exactly N steps on
        for sub in self.sub_cooldown:
            self.sub_cooldown[sub] = max(0, self.sub_cooldown[sub] - 1)
        for lid in self.line_cooldown:
            self.line_cooldown[lid] = max(0, self.line_cooldown[lid] - 1)

        self.alpha, accepted = budget_update(self.alpha, alarm is not None, params)
        alarm_rejected = alarm is not None and not accepted
        if accepted:
            self.alarms.append((t, sorted(alarm.zones)))

        self.step_index = t
        self._obs = self._make_observation(t, cascade.final_solution, inj)

        game_over = None
        if cascade.load_lost:
            if cascade.tripped_lines:
                cause = "cascade"
            elif not cascade.final_solution.converged:
                cause = "non-convergence"
            else:
                cause = "islanded load"
            game_over = GameOverInfo(t_bar=t,
                                     failure_zone=determine_failure_zone(case, cascade),
                                     cause=cause)
            self.game_over = game_over
            self.finished = True

        survived_all = (t == self.scenario.n_steps - 1) and game_over is None
        if survived_all:
            self.finished = True
        done = self.finished

        self._append_record(action=applied if verdict.legal else action,
                            alarm=alarm, alarm_rejected=alarm_rejected,
                            tripped=cascade.tripped_lines, legal=verdict.legal,
                            reasons=verdict.reasons, sol=cascade.final_solution,
                            curtailed=curtailed, inj=inj, new_attack=new_attack)

        info = StepInfo(legal=verdict.legal, illegal_reasons=verdict.reasons,
                        alarm_rejected=alarm_rejected, tripped=cascade.tripped_lines,
                        new_attack=new_attack, done=done, game_over=game_over)
        return self._obs, info

    def simulate(self, action: Action) -> Observation:
        """One-step lookahead under persistence injections: the action is
        applied to copies, no opponent/maintenance events fire, no budget
        moves, and the real state is untouched."""
        if self.finished:
            raise EnvError("episode is finished")
        case = self.case
        topo = apply_topology(self.topology,
                              TopologyAction(set_busbars=action.set_busbars,
                                             set_line_status=action.set_line_status))
        redisp = dict(self.redispatch)
        for gen_id, delta in action.redispatch.items():
            gen = case.gen_by_id.get(gen_id)
            if gen is not None and gen.kind == "dispatchable":
                redisp[gen_id] = redisp.get(gen_id, 0.0) + float(np.clip(delta, -gen.ramp, gen.ramp))
        caps = dict(self.curtail_cap)
        caps.update(action.curtail)

        inj, _ = self._build_injections(self.step_index, redispatch=redisp, caps=caps)
        sol = solve_dc(case, topo, inj, self._forced_out())
        obs = self._make_observation(self.step_index, sol, inj, topology=topo,
                                     prediction=True)
        return obs

    def simulate_n1(self, line_id: str) -> FlowSolution:
        """Flows if `line_id` dropped out right now (persistence injections);
        backs the pre-attack screening of the rule-based alarm agents."""
        inj, _ = self._build_injections(self.step_index)
        return simulate_n1(self.case, self.topology, inj, line_id,
                           self._forced_out())

    # ---------------------------------------------------------- accessories

    def observation(self) -> Observation:
        if self._obs is None:
            raise EnvError("call reset() first")
        return self._obs

    def episode_log(self, agent_name: str = "", case_ref: str = "",
                    scenario_ref: dict | None = None) -> EpisodeLog:
        header = {
            "version": FORMAT_VERSION,
            "case": case_ref or self.case.name,
            "scenario": scenario_ref or {"kind": "named", "name": self.scenario.name},
            "seed": self.seed,
            "agent": agent_name,
            "params": asdict(self.params),
            "attack_schedule": self.attack_schedule,
            "n_steps": self.scenario.n_steps,
        }
        terminal = None
        if self.finished:
            if self.game_over is not None:
                terminal = TerminalRecord(outcome="failed", t_bar=self.game_over.t_bar,
                                          failure_zone=self.game_over.failure_zone,
                                          cause=self.game_over.cause)
            else:
                terminal = TerminalRecord(outcome="survived", t_bar=None,
                                          failure_zone=None, cause=None)
        return EpisodeLog(header=header, steps=list(self.records), terminal=terminal)

    def state_hash(self) -> str:
        opp = self.opponent
        state = {
            "step": self.step_index,
            "alpha": self.alpha,
            "busbars": sorted(self.topology.busbar_of_element.items()),
            "status": sorted(self.topology.line_status.items()),
            "sub_cooldown": sorted(self.sub_cooldown.items()),
            "line_cooldown": sorted(self.line_cooldown.items()),
            "timers": sorted(self.timers.steps_overloaded.items()),
            "redispatch": sorted(self.redispatch.items()),
            "caps": sorted(self.curtail_cap.items()),
            "attacked": sorted(self.attacked),
            "maintenance": sorted(self.maintenance),
            "opponent": None if opp is None else {
                "next": opp.next_attack_step,
                "pin": opp.pin_index,
                "active": None if opp.active_attack is None else
                    [opp.active_attack.line, opp.active_attack.start_step,
                     opp.active_attack.duration_steps],
            },
        }
        blob = json.dumps(state, sort_keys=True)
        return hashlib.sha256(blob.encode()).hexdigest()[:32]

    # ------------------------------------------------------------ internals

    def _forced_out(self) -> frozenset[str]:
        return frozenset(self.attacked | self.maintenance)

    def _step_opponent(self, t: int) -> AttackEvent | None:
        if self.opponent is None:
            self.attacked = set()
            return None
        rho_prev = {lid: self._obs.rho[lid] for lid in self.case.attackable_line_ids}
        disconnected = {lid for lid in self.case.attackable_line_ids
                        if self._obs.line_status[lid] != CONNECTED}
        before = self.opponent.active_attack
        self.opponent, attacked = step_opponent(self.opponent, rho_prev, t, disconnected)
        self.attacked = attacked
        after = self.opponent.active_attack
        if after is not None and after is not before:
            self.last_attack_step = t
            return after
        return None

    def _build_injections(self, t: int, redispatch: dict[str, float] | None = None,
                          caps: dict[str, float] | None = None
                          ) -> tuple[Injections, float]:
        """Generator targets and loads at chronics row t; returns the
        curtailed renewable energy alongside."""
        case = self.case
        redispatch = self.redispatch if redispatch is None else redispatch
        caps = self.curtail_cap if caps is None else caps
        sched = self.scenario.gens_at(t)
        loads = self.scenario.loads_at(t)
        p_gen: dict[str, float] = {}
        curtailed = 0.0
        for gen in case.generators:
            if gen.kind == "dispatchable":
                target = sched[gen.id] + redispatch.get(gen.id, 0.0)
                p_gen[gen.id] = float(np.clip(target, gen.p_min, gen.p_max))
            else:
                available = sched[gen.id]
                cap = caps.get(gen.id)
                actual = available if cap is None else min(available, cap)
                p_gen[gen.id] = actual
                curtailed += available - actual
        return Injections(p_gen=p_gen, p_load=loads), curtailed

    def _make_observation(self, t: int, sol: FlowSolution, inj: Injections,
                          topology: Topology | None = None,
                          prediction: bool = False) -> Observation:
        case = self.case
        topo = topology if topology is not None else self.topology
        forced = self._forced_out()
        effective = {lid: (DISCONNECTED if lid in forced else topo.line_status[lid])
                     for lid in topo.line_status}
        sched = self.scenario.gens_at(t if not prediction else self.step_index)
        gen_target = {}
        for gen in case.generators:
            if gen.kind == "dispatchable":
                gen_target[gen.id] = sched[gen.id] + self.redispatch.get(gen.id, 0.0)
            else:
                gen_target[gen.id] = inj.p_gen[gen.id]
        return Observation(
            step=t,
            rho=dict(sol.rho),
            p_flow=dict(sol.p_flow),
            line_status=effective,
            attacked=set(self.attacked),
            maintenance_out=set(self.maintenance),
            sub_cooldown=dict(self.sub_cooldown),
            line_cooldown=dict(self.line_cooldown),
            gen_p=dict(sol.gen_output),
            gen_target=gen_target,
            load_p=dict(inj.p_load),
            unserved_subs=list(sol.unserved_subs),
            topology=topo.copy(),
            attention_budget=self.alpha,
            last_attack_step=self.last_attack_step,
            last_maintenance_step=self.last_maintenance_step,
            case=case,
            is_prediction=prediction,
        )

    def _append_record(self, action: Action, alarm: Alarm | None,
                       alarm_rejected: bool, tripped: list[str], legal: bool,
                       reasons: list[str], sol: FlowSolution, curtailed: float,
                       inj: Injections, new_attack: AttackEvent | None) -> None:
        flags: dict = {"legal": legal}
        if reasons:
            flags["illegal_reasons"] = reasons
        if new_attack is not None:
            flags["new_attack"] = {"line": new_attack.line,
                                   "start_step": new_attack.start_step,
                                   "duration_steps": new_attack.duration_steps}
        record = StepRecord(
            step=self.step_index,
            action=action.to_json(),
            alarm=sorted(alarm.zones) if alarm is not None else None,
            alarm_rejected=alarm_rejected,
            alpha=self.alpha,
            rho=[sol.rho[line.id] for line in self.case.lines],
            attacked=sorted(self.attacked),
            tripped=list(tripped),
            flags=flags,
            topo_distance=topology_distance(self._obs),
            losses_mw=losses_proxy(self.case, sol),
            redispatch_mw={gid: val for gid, val in sorted(self.redispatch.items())
                           if val != 0.0},
            curtailed_mw=curtailed,
            load_mw=float(sum(inj.p_load.values())),
            state_hash=self.state_hash(),
        )
        self.records.append(record)


def _seed_of(seq: np.random.SeedSequence) -> int:
    return int(seq.generate_state(1, dtype=np.uint64)[0])
