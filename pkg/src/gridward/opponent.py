"""Adversarial line-attack process.

Attack start times follow a geometric distribution with mean 288 steps
(about one attack per day), durations an exponential with mean 48 steps
resampled until inside [24, 96] (2 to 8 hours), and the target line is
drawn with probability proportional to its current loading rho, clamped
into a 1:4 ratio band so lightly loaded lines still get attacked sometimes.
Only one attack can be active at a time.

Randomness is split into two named streams: the *schedule* stream (start
times and durations) and the *target* stream (which line). Pinning the
schedule to a file keeps attack times and durations identical across
agents while targets may still differ with their load profiles.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

MEAN_INTER_ATTACK_STEPS = 288
MEAN_DURATION_STEPS = 48.0
DURATION_RANGE = (24, 96)
WEIGHT_RATIO_CAP = 4.0
WEIGHT_EPS = 1e-6


@dataclass(frozen=True)
class AttackEvent:
    line: str
    start_step: int
    duration_steps: int

    @property
    def end_step(self) -> int:
        return self.start_step + self.duration_steps


@dataclass
class OpponentState:
    """Owned by a single environment instance; stepped once per env step."""

    schedule_rng: np.random.Generator
    target_rng: np.random.Generator
    next_attack_step: int
    active_attack: AttackEvent | None = None
    pinned_schedule: list[tuple[int, int]] | None = None
    pin_index: int = 0
    history: list[AttackEvent] = field(default_factory=list)


def sample_inter_attack(rng: np.random.Generator) -> int:
    """Geometric gap between attack starts, support {1, 2, ...}, mean 288."""
    return int(rng.geometric(1.0 / MEAN_INTER_ATTACK_STEPS))


def sample_duration(rng: np.random.Generator) -> int:
    """Exponential duration (mean 48 steps) resampled until within [24, 96]."""
    lo, hi = DURATION_RANGE
    while True:
        steps = int(round(rng.exponential(MEAN_DURATION_STEPS)))
        if lo <= steps <= hi:
            return steps


def attack_probabilities(rho: dict[str, float],
                         disconnected: set[str] | frozenset[str] = frozenset()
                         ) -> dict[str, float]:
    """Target distribution over attackable lines from their load factors.

    Weights are rho clamped into [w_min, 4*w_min] where w_min is the
    smallest positive rho among connected candidates (epsilon fallback when
    all are idle), then normalized. Disconnected lines get probability 0;
    with no connected candidate the distribution is empty.
    """
    candidates = [lid for lid in rho if lid not in disconnected]
    if not candidates:
        return {}
    positive = [rho[lid] for lid in candidates if rho[lid] > 0.0]
    w_min = max(WEIGHT_EPS, min(positive)) if positive else WEIGHT_EPS
    weights = {lid: min(max(rho[lid], w_min), WEIGHT_RATIO_CAP * w_min)
               for lid in candidates}
    total = sum(weights.values())
    probs = {lid: w / total for lid, w in weights.items()}
    for lid in disconnected:
        if lid in rho:
            probs[lid] = 0.0
    return probs


def init_opponent(seed: int,
                  pinned_schedule: list[tuple[int, int]] | None = None) -> OpponentState:
    schedule_seq, target_seq = np.random.SeedSequence(seed).spawn(2)
    schedule_rng = np.random.default_rng(schedule_seq)
    target_rng = np.random.default_rng(target_seq)
    if pinned_schedule is not None:
        next_step = pinned_schedule[0][0] if pinned_schedule else 2**62
    else:
        next_step = sample_inter_attack(schedule_rng)
    return OpponentState(schedule_rng=schedule_rng, target_rng=target_rng,
                         next_attack_step=next_step,
                         pinned_schedule=pinned_schedule)


def _next_scheduled(state: OpponentState, step: int) -> tuple[int, int | None]:
    """(next start, duration or None) consuming schedule draws as needed."""
    if state.pinned_schedule is not None:
        if state.pin_index < len(state.pinned_schedule):
            return state.pinned_schedule[state.pin_index]
        return 2**62, None
    return state.next_attack_step, None


def step_opponent(state: OpponentState, rho: dict[str, float], step: int,
                  disconnected: set[str] | frozenset[str] = frozenset()
                  ) -> tuple[OpponentState, set[str]]:
    """Advance the opponent one step; returns the attacked-line flags.

    `rho` holds the load factor of every attackable line at the
    attack-decision instant (the previous solved state); `disconnected`
    marks attackable lines that cannot be targeted.
    """
    if state.active_attack is not None and step >= state.active_attack.end_step:
        state.active_attack = None

    if state.active_attack is None:
        start, pinned_duration = _next_scheduled(state, step)
        if step >= start:
            # consume schedule draws even if the attack cannot land, so the
            # schedule stream stays aligned across agents
            if pinned_duration is not None:
                duration = pinned_duration
                state.pin_index += 1
            else:
                duration = sample_duration(state.schedule_rng)
                state.next_attack_step = step + sample_inter_attack(state.schedule_rng)
            probs = attack_probabilities(rho, disconnected)
            live = [(lid, p) for lid, p in sorted(probs.items()) if p > 0.0]
            if live:
                lines = [lid for lid, _ in live]
                p = np.array([pr for _, pr in live])
                p = p / p.sum()
                target = lines[int(state.target_rng.choice(len(lines), p=p))]
                state.active_attack = AttackEvent(line=target, start_step=step,
                                                  duration_steps=duration)
                state.history.append(state.active_attack)

    attacked = {state.active_attack.line} if state.active_attack is not None else set()
    return state, attacked


# -------------------------------------------------------- schedule files

def load_attack_schedule(path: str | Path) -> list[tuple[int, int]]:
    """CSV with header start_step,duration_steps; rows sorted by start."""
    rows: list[tuple[int, int]] = []
    with Path(path).open() as fh:
        for row in csv.DictReader(fh):
            rows.append((int(row["start_step"]), int(row["duration_steps"])))
    rows.sort()
    lo, hi = DURATION_RANGE
    for start, duration in rows:
        if start < 0 or not (lo <= duration <= hi):
            raise ValueError(f"bad schedule entry ({start}, {duration})")
    return rows


def save_attack_schedule(schedule: list[tuple[int, int]], path: str | Path) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["start_step", "duration_steps"])
        writer.writerows(schedule)
