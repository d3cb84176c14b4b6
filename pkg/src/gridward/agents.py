"""Baseline agents: do-nothing, rule-based alarm makers and a
simulation-intensive expert, composed as action-maker + alarm-maker.

The first rule-based alarm maker fires when some line is out (or under
attack) while some line is overloaded, naming the zones of the overloaded
lines. The second one additionally screens the attackable lines one at a
time (would losing this line overload the grid?) and pre-warns when a
predicted loading exceeds its threshold, rate-limited to one alarm per D
steps.

The expert action maker stays idle below its activation loading, and
otherwise simulates every candidate action in its database, picking the
one whose predicted worst loading is smallest (do-nothing wins ties, then
the lowest candidate index). The default database holds every
single-substation busbar configuration touching at most four elements plus
single-line reconnections; a curated action file can replace it.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from itertools import combinations
from pathlib import Path
from typing import Callable

from .environment import (
    Action,
    Alarm,
    DO_NOTHING,
    GridEnv,
    Observation,
    check_legal,
)
from .grid_model import CONNECTED, GridCase
from .power_flow import FlowSolution

AGENT_NAMES = ("do-nothing", "dn+rba1", "dn+rba2", "sie+rba1", "sie+rba2")

SIE_ACTIVATION_RHO = 0.95
SIE_MAX_ELEMENTS = 4


@dataclass
class AgentDecision:
    action: Action
    alarm: Alarm | None = None


@dataclass(frozen=True)
class RbA2Params:
    t_h: float = 1.0            # predicted-loading threshold
    d_min_steps: int = 7        # minimum spacing between alarms
    budget_reserve: float = 2.0  # N-1 pre-warnings only above this budget

    def __post_init__(self):
        if self.t_h <= 0 or self.d_min_steps < 1:
            raise ValueError("RbA2Params requires t_h > 0 and d_min_steps >= 1")


# ------------------------------------------------------------- primitives

def do_nothing_agent(obs: Observation) -> AgentDecision:
    return AgentDecision(action=DO_NOTHING, alarm=None)


def rba1_alarm(obs: Observation) -> Alarm | None:
    """Alarm iff some line is disconnected/attacked AND some line is
    overloaded; zones = zones of the overloaded lines (both ends count)."""
    any_out = obs.attacked or any(status != CONNECTED
                                  for status in obs.line_status.values())
    if not any_out:
        return None
    overloaded = obs.overloaded_lines()
    if not overloaded:
        return None
    zones: set[int] = set()
    for line_id in overloaded:
        zones |= obs.case.zones_of_line(line_id)
    return Alarm.for_zones(zones)


def rba2_alarm(obs: Observation, n1_oracle: Callable[[str], FlowSolution],
               params: RbA2Params, last_alarm_step: int) -> Alarm | None:
    """RbA-I condition, or an N-1 screen of the attackable lines: if the
    worst predicted loading exceeds t_h and no alarm went out in the last
    d_min_steps, alarm for the zones of the predicted overloads.

    Pre-warnings also require the attention budget to sit above a reserve,
    keeping one alarm in hand for the reactive branch; a grid that stays
    N-1 insecure for hours would otherwise drain the budget and leave
    nothing for the actual failure.
    """
    alarm = rba1_alarm(obs)
    if alarm is not None:
        return alarm
    if obs.step - last_alarm_step < params.d_min_steps:
        return None
    if obs.attention_budget < params.budget_reserve:
        return None
    zones: set[int] = set()
    worst = 0.0
    for line_id in obs.case.attackable_line_ids:
        if obs.line_status[line_id] != CONNECTED:
            continue
        predicted = n1_oracle(line_id)
        for other_id, rho in predicted.rho.items():
            worst = max(worst, rho)
            if rho > params.t_h:
                zones |= obs.case.zones_of_line(other_id)
    if worst > params.t_h and zones:
        return Alarm.for_zones(zones)
    return None


def sie_act(obs: Observation, candidate_actions: list[Action],
            simulate: Callable[[Action], Observation]) -> Action:
    """Below the activation loading do nothing; otherwise return the
    candidate minimizing the predicted max rho (do-nothing first in the
    list wins ties, then the lowest index).

    A candidate whose prediction cuts load off ranks behind any candidate
    that keeps everyone served: shedding consumers zeroes their flows, so a
    bare rho argmin would otherwise prefer islanding load, which is an
    instant game over.
    """
    if not candidate_actions:
        raise ValueError("candidate list must not be empty")
    predicted_idle = simulate(DO_NOTHING).max_rho()
    if obs.max_rho() < SIE_ACTIVATION_RHO and predicted_idle < SIE_ACTIVATION_RHO:
        return DO_NOTHING
    best_action = None
    best_key = None
    for action in candidate_actions:
        predicted = simulate(action)
        key = (bool(predicted.unserved_subs), predicted.max_rho())
        if best_key is None or key < best_key:
            best_key = key
            best_action = action
    return best_action


# --------------------------------------------------------- candidate pool

def build_candidate_actions(case: GridCase,
                            max_elements: int = SIE_MAX_ELEMENTS) -> list[Action]:
    """Do-nothing, every single-substation busbar configuration moving at
    most `max_elements` elements to busbar 2, and line reconnections."""
    candidates: list[Action] = [DO_NOTHING]
    for sub in case.substations:
        elements = case.elements_of_sub(sub.id)
        for size in range(0, min(max_elements, len(elements)) + 1):
            for moved in combinations(elements, size):
                moved_set = set(moved)
                assignment = {key: (2 if key in moved_set else 1) for key in elements}
                candidates.append(Action(set_busbars=assignment))
    for line in case.lines:
        candidates.append(Action(set_line_status={line.id: CONNECTED}))
    return candidates


def load_candidate_actions(path: str | Path, case: GridCase) -> list[Action]:
    """Curated action file: one JSON action per line; do-nothing prepended."""
    candidates = [DO_NOTHING]
    for line_no, line in enumerate(Path(path).read_text().splitlines(), start=1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        try:
            candidates.append(Action.from_json(json.loads(line)))
        except (json.JSONDecodeError, ValueError) as exc:
            raise ValueError(f"{path}:{line_no}: bad action: {exc}") from exc
    return candidates


# -------------------------------------------------------------- composition

class BaseAgent:
    """One instance per episode; reset() clears alarm spacing state."""

    name = "agent"

    def reset(self) -> None:
        pass

    def decide(self, obs: Observation, env: GridEnv) -> AgentDecision:
        raise NotImplementedError


class DoNothingAgent(BaseAgent):
    name = "do-nothing"

    def decide(self, obs: Observation, env: GridEnv) -> AgentDecision:
        return do_nothing_agent(obs)


class _AlarmMixin:
    """Shared alarm plumbing: which alarm maker runs and its spacing state."""

    def __init__(self, alarm_kind: str, rba2_params: RbA2Params | None = None):
        self.alarm_kind = alarm_kind
        self.rba2_params = rba2_params or RbA2Params()
        self.last_alarm_step = -10**9

    def reset(self) -> None:
        self.last_alarm_step = -10**9

    def make_alarm(self, obs: Observation, env: GridEnv) -> Alarm | None:
        if self.alarm_kind == "rba1":
            alarm = rba1_alarm(obs)
        elif self.alarm_kind == "rba2":
            alarm = rba2_alarm(obs, env.simulate_n1, self.rba2_params,
                               self.last_alarm_step)
        else:
            alarm = None
        if alarm is not None:
            self.last_alarm_step = obs.step
        return alarm


class DnAlarmAgent(_AlarmMixin, BaseAgent):
    """Do-nothing actions composed with a rule-based alarm maker."""

    def __init__(self, alarm_kind: str, rba2_params: RbA2Params | None = None):
        super().__init__(alarm_kind, rba2_params)
        self.name = f"dn+{alarm_kind}"

    def decide(self, obs: Observation, env: GridEnv) -> AgentDecision:
        return AgentDecision(action=DO_NOTHING, alarm=self.make_alarm(obs, env))


class SiEAgent(_AlarmMixin, BaseAgent):
    """Simulation-intensive expert actions, optional rule-based alarms.

    On a quiet grid the agent walks the topology back to the reference one
    substation / one line at a time (whenever the restore itself predicts
    quiet): a topology left split after an incident feeds loads through
    single corridors that a later attack can snipe, so lingering at a
    deviated topology is strictly more fragile than the reference.
    """

    def __init__(self, case: GridCase, alarm_kind: str = "none",
                 rba2_params: RbA2Params | None = None,
                 candidates: list[Action] | None = None):
        super().__init__(alarm_kind, rba2_params)
        self.case = case
        self.candidates = candidates if candidates is not None \
            else build_candidate_actions(case)
        self.name = "sie" if alarm_kind == "none" else f"sie+{alarm_kind}"

    def decide(self, obs: Observation, env: GridEnv) -> AgentDecision:
        alarm = self.make_alarm(obs, env)
        if obs.max_rho() < SIE_ACTIVATION_RHO \
                and env.simulate(DO_NOTHING).max_rho() < SIE_ACTIVATION_RHO:
            recovery = self._recovery_action(obs, env)
            return AgentDecision(action=recovery or DO_NOTHING, alarm=alarm)
        legal = [a for a in self.candidates
                 if a.is_do_nothing() or
                 (_changes_state(a, obs) and check_legal(obs, a, env.params).legal)]
        action = sie_act(obs, legal, env.simulate)
        return AgentDecision(action=action, alarm=alarm)

    def _recovery_action(self, obs: Observation, env: GridEnv) -> Action | None:
        """One step back toward the reference topology, if safe."""
        ref = self.case.reference_topology
        for sub in self.case.substations:
            keys = self.case.elements_of_sub(sub.id)
            if all(obs.topology.busbar_of_element[k] == ref.busbar_of_element[k]
                   for k in keys):
                continue
            restore = Action(set_busbars={k: ref.busbar_of_element[k] for k in keys})
            if self._safe_when_quiet(restore, obs, env):
                return restore
        for line in self.case.lines:
            if obs.topology.line_status[line.id] == ref.line_status[line.id]:
                continue
            reconnect = Action(set_line_status={line.id: ref.line_status[line.id]})
            if self._safe_when_quiet(reconnect, obs, env):
                return reconnect
        return None

    def _safe_when_quiet(self, action: Action, obs: Observation,
                         env: GridEnv) -> bool:
        if not check_legal(obs, action, env.params).legal:
            return False
        predicted = env.simulate(action)
        return predicted.max_rho() < SIE_ACTIVATION_RHO \
            and not predicted.unserved_subs


def _changes_state(action: Action, obs: Observation) -> bool:
    """Skip candidates that would not move anything (saves simulations and
    avoids burning cooldowns on no-ops)."""
    for key, busbar in action.set_busbars.items():
        if obs.topology.busbar_of_element.get(key) != busbar:
            return True
    for line_id, status in action.set_line_status.items():
        if obs.topology.line_status.get(line_id) != status:
            return True
    return bool(action.redispatch or action.curtail)


def make_agent(name: str, case: GridCase,
               rba2_params: RbA2Params | None = None,
               curated_actions: str | Path | None = None) -> BaseAgent:
    candidates = None
    if curated_actions is not None:
        candidates = load_candidate_actions(curated_actions, case)
    if name == "do-nothing":
        return DoNothingAgent()
    if name in ("dn+rba1", "dn+rba2"):
        return DnAlarmAgent(name.split("+")[1], rba2_params)
    if name in ("sie", "sie+rba1", "sie+rba2"):
        kind = name.split("+")[1] if "+" in name else "none"
        return SiEAgent(case, kind, rba2_params, candidates)
    raise ValueError(f"unknown agent '{name}' (choose from {AGENT_NAMES})")
