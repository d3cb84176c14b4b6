"""Alarm score, operation-cost score, combined score and behavior statistics.

The alarm score rewards warning the operator inside a validity window
around the ideal lead time of 35 minutes (half-width 25 minutes): a
surviving episode always scores 100, a failure with no valid alarm scores
-200, and a valid alarm scores 100 * (1 - |35min - lead| / 25min), scaled
by 2/3 when the named zone is not where the failure happened. With
several valid alarms the best one counts.

The operation-cost score is a proxy anchored on three reference costs
computed per scenario: the do-nothing episode (score 0), an idealized
lower bound (score 100) and an immediate blackout (score -100), linear
between anchors and clamped.

The combined score weighs the alarm part at 0.3 and the operation part at
0.7, with the alarm score first rescaled from [-200, 100] onto
[-100, 100] so the two terms share a scale (x -> (2x + 100) / 3); reports
show both the raw and the rescaled alarm value.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .episode_log import EpisodeLog
from .grid_model import GridCase


@dataclass(frozen=True)
class AlarmRecord:
    step: int              # t_a
    zones: tuple[int, ...]
    accepted: bool = True


@dataclass(frozen=True)
class AlarmScoreParams:
    step_minutes: int = 5
    t_opt_minutes: float = 35.0
    t_width_minutes: float = 25.0
    survived_score: float = 100.0
    missed_penalty: float = -200.0
    wrong_zone_factor: float = 2.0 / 3.0


@dataclass(frozen=True)
class PricingConfig:
    """Cost-proxy prices (documented defaults, not taken from any source)."""

    loss_price: float = 80.0       # currency / MWh of losses
    curtail_price: float = 50.0    # currency / MWh curtailed
    ceiling_price: float = 500.0   # currency / MWh unserved after blackout


@dataclass(frozen=True)
class CostBaselines:
    cost_do_nothing: float
    cost_lower_bound: float
    cost_blackout: float

    def __post_init__(self):
        if self.cost_lower_bound >= self.cost_do_nothing:
            raise ValueError(
                f"degenerate baselines: lower bound {self.cost_lower_bound:.2f} "
                f">= do-nothing {self.cost_do_nothing:.2f}")


def alarm_score(alarms: list[AlarmRecord], outcome: str | tuple[int, int],
                params: AlarmScoreParams | None = None) -> float:
    """Best-alarm score: 100 survived, -200 missed, else the lead-time
    formula over valid alarms (see module docstring).

    `outcome` is "survived" or a (t_bar, failure_zone) pair. Only accepted
    alarms may score; the validity window has a strict lower bound (an
    alarm in the final 10 minutes is too late) and an inclusive upper one.
    """
    p = params or AlarmScoreParams()
    if outcome == "survived":
        return p.survived_score
    t_bar, failure_zone = outcome

    best: float | None = None
    for alarm in alarms:
        if not alarm.accepted:
            continue
        lead_minutes = (t_bar - alarm.step) * p.step_minutes
        if not (p.t_opt_minutes - p.t_width_minutes < lead_minutes
                <= p.t_opt_minutes + p.t_width_minutes):
            continue
        base = 100.0 * (1.0 - abs(p.t_opt_minutes - lead_minutes) / p.t_width_minutes)
        f_area = 1.0 if failure_zone in alarm.zones else p.wrong_zone_factor
        score = base * f_area
        if best is None or score > best:
            best = score
    return p.missed_penalty if best is None else best


def rescale_alarm_score(score: float) -> float:
    """Affine map of [-200, 100] onto [-100, 100] used inside Eq-style
    weighting so both terms share a scale."""
    return (2.0 * score + 100.0) / 3.0


# ------------------------------------------------------------ cost proxy

def episode_cost(log: EpisodeLog, case: GridCase,
                 prices: PricingConfig | None = None) -> float:
    """Losses + priced redispatch deviation + curtailment, plus a blackout
    penalty of remaining-steps x demand-at-failure x ceiling price."""
    prices = prices or PricingConfig()
    step_hours = case.step_minutes / 60.0
    cost = 0.0
    for record in log.steps:
        cost += record.losses_mw * step_hours * prices.loss_price
        for gen_id, deviation in record.redispatch_mw.items():
            gen = case.gen_by_id.get(gen_id)
            marginal = gen.marginal_cost if gen is not None else 0.0
            cost += abs(deviation) * step_hours * marginal
        cost += record.curtailed_mw * step_hours * prices.curtail_price
    terminal = log.terminal
    if terminal is not None and terminal.outcome == "failed":
        n_steps = int(log.header.get("n_steps", len(log.steps)))
        remaining = max(0, n_steps - terminal.t_bar)
        demand = log.steps[-1].load_mw
        cost += remaining * demand * step_hours * prices.ceiling_price
    return cost


def operation_cost_score(cost: float, baselines: CostBaselines) -> float:
    """Piecewise-linear: 0 at do-nothing, 100 at the lower bound, -100 at
    the immediate-blackout cost; clamped to [-100, 100]."""
    if cost <= baselines.cost_do_nothing:
        span = baselines.cost_do_nothing - baselines.cost_lower_bound
        score = 100.0 * (baselines.cost_do_nothing - cost) / span
    else:
        # a do-nothing run that fails early on peak demand can cost more
        # than the immediate-blackout anchor; everything past it is -100
        span = baselines.cost_blackout - baselines.cost_do_nothing
        score = -100.0 if span <= 0 else \
            -100.0 * (cost - baselines.cost_do_nothing) / span
    return min(100.0, max(-100.0, score))


# --------------------------------------------------------------- combined

ALARM_WEIGHT = 0.3
OPERATION_WEIGHT = 0.7


@dataclass
class ScenarioScore:
    scenario: str
    outcome: str
    alarm_score: float
    alarm_rescaled: float
    operation_score: float
    combined: float
    best_alarm_lead: int | None    # t_a - t_bar of the best valid alarm
    t_bar: int                     # n_steps for survived episodes


@dataclass
class ScoreBreakdown:
    rows: list[ScenarioScore]

    @property
    def mean_alarm(self) -> float:
        return sum(r.alarm_score for r in self.rows) / len(self.rows)

    @property
    def mean_operation(self) -> float:
        return sum(r.operation_score for r in self.rows) / len(self.rows)

    @property
    def mean_combined(self) -> float:
        return sum(r.combined for r in self.rows) / len(self.rows)


def combined_score(alarm: float, operation: float) -> float:
    return ALARM_WEIGHT * rescale_alarm_score(alarm) + OPERATION_WEIGHT * operation


def score_episode(log: EpisodeLog, case: GridCase, baselines: CostBaselines,
                  prices: PricingConfig | None = None,
                  alarm_params: AlarmScoreParams | None = None) -> ScenarioScore:
    terminal = log.terminal
    if terminal is None:
        raise ValueError("cannot score an unfinished episode log")
    alarms = [AlarmRecord(step=step, zones=tuple(zones))
              for step, zones in log.accepted_alarms()]
    if terminal.outcome == "survived":
        outcome: str | tuple[int, int] = "survived"
    else:
        outcome = (terminal.t_bar, terminal.failure_zone)
    s_alarm = alarm_score(alarms, outcome, alarm_params)
    cost = episode_cost(log, case, prices)
    s_op = operation_cost_score(cost, baselines)

    best_lead = None
    if terminal.outcome == "failed":
        p = alarm_params or AlarmScoreParams()
        best = None
        for alarm in alarms:
            lead_minutes = (terminal.t_bar - alarm.step) * p.step_minutes
            if not (p.t_opt_minutes - p.t_width_minutes < lead_minutes
                    <= p.t_opt_minutes + p.t_width_minutes):
                continue
            base = 100.0 * (1.0 - abs(p.t_opt_minutes - lead_minutes) / p.t_width_minutes)
            f_area = 1.0 if terminal.failure_zone in alarm.zones else p.wrong_zone_factor
            score = base * f_area
            if best is None or score > best:
                best = score
                best_lead = alarm.step - terminal.t_bar
    n_steps = int(log.header.get("n_steps", len(log.steps)))
    return ScenarioScore(
        scenario=str(log.header.get("scenario", {}).get("name", log.header.get("scenario"))),
        outcome=terminal.outcome,
        alarm_score=s_alarm,
        alarm_rescaled=rescale_alarm_score(s_alarm),
        operation_score=s_op,
        combined=combined_score(s_alarm, s_op),
        best_alarm_lead=best_lead,
        t_bar=terminal.t_bar if terminal.outcome == "failed" else n_steps,
    )


# -------------------------------------------------------------- statistics

STEPS_PER_DAY = 288
STEPS_PER_WEEK = 2016


@dataclass
class TimelineSeries:
    """Per-step series of one episode for Fig-style timeline plots."""

    scenario: str
    alpha: list[float]
    topo_distance: list[int]
    attack_windows: list[tuple[int, int, str]]   # (start, end_exclusive, line)
    alarm_steps: list[int]
    tripped_steps: list[int]


@dataclass
class BehaviorStats:
    alarms_per_day: float
    mean_budget: float
    frac_steps_budget_below_1: float
    actions_per_week_mean: float
    actions_per_week_max: float
    episodes: int
    series: list[TimelineSeries] = field(default_factory=list)


def _attack_windows(log: EpisodeLog) -> list[tuple[int, int, str]]:
    windows: list[tuple[int, int, str]] = []
    open_attacks: dict[str, int] = {}
    last_step = 0
    for record in log.steps:
        last_step = record.step
        now = set(record.attacked)
        for line in list(open_attacks):
            if line not in now:
                windows.append((open_attacks.pop(line), record.step, line))
        for line in now:
            open_attacks.setdefault(line, record.step)
    for line, start in open_attacks.items():
        windows.append((start, last_step + 1, line))
    windows.sort()
    return windows


def episode_stats(logs: list[EpisodeLog]) -> BehaviorStats:
    """Aggregate behavior statistics over one or more episode logs."""
    if not logs:
        raise ValueError("no logs to analyze")
    total_steps = 0
    total_alarms = 0
    alpha_sum = 0.0
    below_one = 0
    actions_per_week = []
    series = []
    for log in logs:
        steps = log.steps
        total_steps += len(steps)
        total_alarms += len(log.accepted_alarms())
        alpha_sum += sum(r.alpha for r in steps)
        below_one += sum(1 for r in steps if r.alpha < 1.0)
        n_actions = sum(1 for r in steps if r.action)
        actions_per_week.append(n_actions * STEPS_PER_WEEK / len(steps))
        series.append(TimelineSeries(
            scenario=str(log.header.get("scenario", {}).get("name", "")),
            alpha=[r.alpha for r in steps],
            topo_distance=[r.topo_distance for r in steps],
            attack_windows=_attack_windows(log),
            alarm_steps=[r.step for r in steps
                         if r.alarm is not None and not r.alarm_rejected],
            tripped_steps=[r.step for r in steps if r.tripped],
        ))
    return BehaviorStats(
        alarms_per_day=total_alarms / (total_steps / STEPS_PER_DAY),
        mean_budget=alpha_sum / total_steps,
        frac_steps_budget_below_1=below_one / total_steps,
        actions_per_week_mean=sum(actions_per_week) / len(actions_per_week),
        actions_per_week_max=max(actions_per_week),
        episodes=len(logs),
        series=series,
    )
