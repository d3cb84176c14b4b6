"""Episode log: JSON-lines, one record per step plus a terminal record.

This format is the contract between the environment, the scoring harness,
the statistics module and the replay verifier. Step records carry the
fields {step, action, alarm, alarm_rejected, alpha, rho, attacked,
tripped, flags} plus bookkeeping used by the cost proxy and replay
(losses, redispatch, curtailment, demand, state hash, topology distance).
Floats round-trip exactly through JSON (shortest-repr encoding), which is
what makes byte-identical logs and exact budget-trace reconstruction
possible.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

FORMAT_VERSION = 1


@dataclass
class StepRecord:
    step: int
    action: dict
    alarm: list[int] | None          # zone indices, sorted
    alarm_rejected: bool
    alpha: float
    rho: list[float]                 # per line, case order
    attacked: list[str]
    tripped: list[str]
    flags: dict
    topo_distance: int
    losses_mw: float
    redispatch_mw: dict[str, float]  # active deviation per generator
    curtailed_mw: float
    load_mw: float
    state_hash: str


@dataclass
class TerminalRecord:
    outcome: str                     # survived | failed
    t_bar: int | None
    failure_zone: int | None
    cause: str | None
    scores: dict = field(default_factory=dict)


@dataclass
class EpisodeLog:
    header: dict
    steps: list[StepRecord]
    terminal: TerminalRecord | None = None

    @property
    def n_steps(self) -> int:
        return len(self.steps)

    def accepted_alarms(self) -> list[tuple[int, list[int]]]:
        return [(r.step, r.alarm) for r in self.steps
                if r.alarm is not None and not r.alarm_rejected]

    def dumps(self) -> str:
        lines = [json.dumps({"type": "header", **self.header}, sort_keys=True)]
        for record in self.steps:
            lines.append(json.dumps({"type": "step", **asdict(record)}, sort_keys=True))
        if self.terminal is not None:
            lines.append(json.dumps({"type": "end", **asdict(self.terminal)}, sort_keys=True))
        return "\n".join(lines) + "\n"


def write_episode_log(log: EpisodeLog, path: str | Path) -> None:
    Path(path).write_text(log.dumps())


def parse_episode_log(text: str, origin: str = "<string>") -> EpisodeLog:
    header: dict = {}
    steps: list[StepRecord] = []
    terminal: TerminalRecord | None = None
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        raw = json.loads(line)
        kind = raw.pop("type", None)
        if kind == "header":
            header = raw
        elif kind == "step":
            steps.append(StepRecord(**raw))
        elif kind == "end":
            terminal = TerminalRecord(**raw)
        else:
            raise ValueError(f"{origin}:{line_no}: unknown record type {kind!r}")
    if not header:
        raise ValueError(f"{origin}: missing header record")
    return EpisodeLog(header=header, steps=steps, terminal=terminal)


def read_episode_log(path: str | Path) -> EpisodeLog:
    return parse_episode_log(Path(path).read_text(), origin=str(path))
