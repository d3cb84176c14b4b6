"""Episode runner, suite evaluator, baselines, reports and replay.

One suite run evaluates an agent over a list of scenarios (chronics
directories or seeded generator configs). Per scenario the seed derives
from the suite seed hashed with the scenario name, so adding scenarios
never perturbs existing ones, and an optional pinned attack-schedule file
makes the opponent's timing identical across agents. Scenarios are
independent work units; --jobs N runs them in processes with results
identical to the sequential order.
"""

from __future__ import annotations

import concurrent.futures
import csv
import hashlib
import io
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

from . import data_path
from .agents import BaseAgent, RbA2Params, make_agent
from .chronics import Scenario, ScenarioConfig, generate_scenario, load_scenario
from .environment import Action, Alarm, EnvParams, GridEnv
from .episode_log import EpisodeLog, parse_episode_log, read_episode_log, write_episode_log
from .grid_model import GridCase, load_case
from .opponent import load_attack_schedule
from .scoring import (
    BehaviorStats,
    CostBaselines,
    PricingConfig,
    ScenarioScore,
    ScoreBreakdown,
    TimelineSeries,
    episode_cost,
    episode_stats,
    score_episode,
)


@dataclass
class RunConfig:
    case: str
    scenarios: list[dict]                  # scenario refs, see resolve_scenario
    agent: str = "do-nothing"
    suite_seed: int = 0
    out_dir: str | None = None
    jobs: int = 1
    attack_schedule: str | None = None
    opponent: bool = True
    rba2: RbA2Params = field(default_factory=RbA2Params)
    pricing: PricingConfig = field(default_factory=PricingConfig)
    env_params: EnvParams | None = None
    curated_actions: str | None = None     # expert candidate file override

    def __post_init__(self):
        if not self.scenarios:
            raise ValueError("at least one scenario is required")


def resolve_case(ref: str) -> GridCase:
    """A case file path, or the name of a bundled case (toy5, case14)."""
    path = Path(ref)
    if path.exists():
        return load_case(path)
    bundled = data_path(f"{ref}.json")
    if bundled.exists():
        return load_case(bundled)
    raise FileNotFoundError(f"case '{ref}' not found (path or bundled name)")


def resolve_scenario(ref: dict, case: GridCase) -> Scenario:
    """Scenario ref: {"kind": "file", "path": P} loads a chronics directory
    (bundled names allowed); {"kind": "generated", "config": {...}} runs the
    synthetic generator."""
    kind = ref.get("kind")
    if kind == "file":
        path = Path(ref["path"])
        if not path.exists():
            bundled = data_path(f"scenarios/{ref['path']}")
            if bundled.exists():
                path = bundled
        return load_scenario(path, case)
    if kind == "generated":
        cfg = dict(ref["config"])
        cfg["peak_load"] = {str(k): float(v) for k, v in cfg["peak_load"].items()}
        return generate_scenario(case, ScenarioConfig(**cfg))
    raise ValueError(f"unknown scenario ref {ref!r}")


def scenario_ref_name(ref: dict) -> str:
    if ref.get("kind") == "file":
        return Path(ref["path"]).name
    return f"gen-{ref['config']['seed']}"


def episode_seed(suite_seed: int, scenario_name: str) -> int:
    digest = hashlib.sha256(f"{suite_seed}:{scenario_name}".encode()).digest()
    return int.from_bytes(digest[:8], "big") % (2**63)


def expand_suite_config(path: str | Path) -> tuple[str, list[dict]]:
    """Suite file: {"case": name, "scenarios": [...]} with explicit refs, or
    {"case", "n", "base_seed", "peak_load", ...} shorthand expanded into n
    generated refs with consecutive seeds."""
    raw = json.loads(Path(path).read_text())
    case = raw["case"]
    if "scenarios" in raw:
        return case, raw["scenarios"]
    refs = []
    for i in range(int(raw["n"])):
        config = {
            "seed": int(raw["base_seed"]) + i,
            "peak_load": raw["peak_load"],
            "n_steps": int(raw.get("n_steps", 2016)),
            "renewable_share_target": float(raw.get("renewable_share", 0.2)),
        }
        refs.append({"kind": "generated", "config": config})
    return case, refs


# ---------------------------------------------------------------- episodes

def drive_episode(env: GridEnv, agent: BaseAgent) -> None:
    obs = env.reset()
    agent.reset()
    while not env.finished:
        decision = agent.decide(obs, env)
        obs, _info = env.step(decision.action, decision.alarm)


def run_episode(case: GridCase, scenario: Scenario, agent_name: str,
                seed: int, env_params: EnvParams | None = None,
                attack_schedule: list[tuple[int, int]] | None = None,
                rba2: RbA2Params | None = None,
                case_ref: str = "", scenario_ref: dict | None = None,
                curated_actions: str | None = None) -> EpisodeLog:
    env = GridEnv(case, scenario, params=env_params, seed=seed,
                  attack_schedule=attack_schedule)
    agent = make_agent(agent_name, case, rba2_params=rba2,
                       curated_actions=curated_actions)
    drive_episode(env, agent)
    return env.episode_log(agent_name=agent_name,
                           case_ref=case_ref or case.name,
                           scenario_ref=scenario_ref or
                           {"kind": "named", "name": scenario.name})


def compute_baselines(case: GridCase, scenario: Scenario, seed: int,
                      env_params: EnvParams | None = None,
                      attack_schedule: list[tuple[int, int]] | None = None,
                      prices: PricingConfig | None = None) -> CostBaselines:
    """Anchors for the operation-cost score on this scenario: the do-nothing
    episode under the same opponent, zero cost as the idealized lower bound,
    and an immediate blackout at step 0."""
    prices = prices or PricingConfig()
    dn_log = run_episode(case, scenario, "do-nothing", seed, env_params,
                         attack_schedule)
    cost_dn = episode_cost(dn_log, case, prices)
    step_hours = case.step_minutes / 60.0
    cost_blackout = scenario.n_steps * scenario.total_load(0) * step_hours \
        * prices.ceiling_price
    return CostBaselines(cost_do_nothing=cost_dn, cost_lower_bound=0.0,
                         cost_blackout=cost_blackout)


# ------------------------------------------------------------------- suite

def _scenario_job(args: dict) -> tuple[str, str, str]:
    """Worker for one scenario: returns (name, agent log text, DN log text)."""
    case = resolve_case(args["case"])
    ref = args["ref"]
    scenario = resolve_scenario(ref, case)
    name = scenario_ref_name(ref)
    seed = episode_seed(args["suite_seed"], name)
    env_params = EnvParams(**args["env_params"])
    schedule = args["schedule"]
    rba2 = RbA2Params(**args["rba2"])
    log = run_episode(case, scenario, args["agent"], seed, env_params, schedule,
                      rba2, case_ref=args["case"], scenario_ref=ref,
                      curated_actions=args.get("curated_actions"))
    dn_log = run_episode(case, scenario, "do-nothing", seed, env_params, schedule,
                         case_ref=args["case"], scenario_ref=ref)
    return name, log.dumps(), dn_log.dumps()


@dataclass
class SuiteResult:
    breakdown: ScoreBreakdown
    stats: BehaviorStats
    logs: list[EpisodeLog]


def run_suite(cfg: RunConfig) -> SuiteResult:
    case = resolve_case(cfg.case)
    env_params = cfg.env_params or EnvParams(opponent_enabled=cfg.opponent)
    schedule = load_attack_schedule(cfg.attack_schedule) \
        if cfg.attack_schedule else None

    jobs = []
    for ref in cfg.scenarios:
        jobs.append({
            "case": cfg.case, "ref": ref, "suite_seed": cfg.suite_seed,
            "agent": cfg.agent, "env_params": asdict(env_params),
            "schedule": schedule, "rba2": asdict(cfg.rba2),
            "curated_actions": cfg.curated_actions,
        })

    results: list[tuple[str, str, str]] = []
    errors: list[str] = []
    if cfg.jobs > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            futures = [pool.submit(_scenario_job, job) for job in jobs]
            for job, future in zip(jobs, futures):
                try:
                    results.append(future.result())
                except Exception as exc:  # report partial table, keep going
                    errors.append(f"{scenario_ref_name(job['ref'])}: {exc}")
    else:
        for job in jobs:
            try:
                results.append(_scenario_job(job))
            except Exception as exc:
                errors.append(f"{scenario_ref_name(job['ref'])}: {exc}")

    rows: list[ScenarioScore] = []
    agent_logs: list[EpisodeLog] = []
    out_dir = Path(cfg.out_dir) if cfg.out_dir else None
    if out_dir:
        out_dir.mkdir(parents=True, exist_ok=True)
    for name, log_text, dn_text in results:
        log = parse_episode_log(log_text, origin=name)
        dn_log = parse_episode_log(dn_text, origin=name)
        cost_dn = episode_cost(dn_log, case, cfg.pricing)
        step_hours = case.step_minutes / 60.0
        demand0 = dn_log.steps[0].load_mw
        n_steps = int(dn_log.header["n_steps"])
        baselines = CostBaselines(cost_do_nothing=cost_dn, cost_lower_bound=0.0,
                                  cost_blackout=n_steps * demand0 * step_hours
                                  * cfg.pricing.ceiling_price)
        row = score_episode(log, case, baselines, cfg.pricing)
        row.scenario = name
        rows.append(row)
        if log.terminal is not None:
            log.terminal.scores = {"alarm": row.alarm_score,
                                   "alarm_rescaled": row.alarm_rescaled,
                                   "operation": row.operation_score,
                                   "combined": row.combined}
        agent_logs.append(log)
        if out_dir:
            write_episode_log(log, out_dir / f"{name}__{cfg.agent}.jsonl")
    if errors and not rows:
        raise RuntimeError("every scenario failed: " + "; ".join(errors))

    breakdown = ScoreBreakdown(rows=rows)
    stats = episode_stats(agent_logs)
    result = SuiteResult(breakdown=breakdown, stats=stats, logs=agent_logs)
    if out_dir:
        (out_dir / "scores.csv").write_text(score_table_csv(breakdown))
        (out_dir / "scores.txt").write_text(
            score_table_text(breakdown) + "\n" + stats_text(stats) +
            ("".join(f"\nerror: {e}" for e in errors)))
    return result


# ----------------------------------------------------------------- reports

def score_table_csv(breakdown: ScoreBreakdown) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["scenario", "outcome", "alarm_score", "alarm_rescaled",
                     "best_alarm_lead", "t_bar", "operation_score", "combined"])
    for row in breakdown.rows:
        writer.writerow([row.scenario, row.outcome, f"{row.alarm_score:.1f}",
                         f"{row.alarm_rescaled:.1f}",
                         "" if row.best_alarm_lead is None else row.best_alarm_lead,
                         row.t_bar, f"{row.operation_score:.1f}",
                         f"{row.combined:.1f}"])
    writer.writerow(["MEAN", "", f"{breakdown.mean_alarm:.1f}", "", "", "",
                     f"{breakdown.mean_operation:.1f}",
                     f"{breakdown.mean_combined:.1f}"])
    return buf.getvalue()


def score_table_text(breakdown: ScoreBreakdown) -> str:
    header = f"{'scenario':<16}{'outcome':<10}{'S':>8}{'t_a-t_bar':>11}" \
             f"{'t_bar':>7}{'oper':>8}{'combined':>10}"
    lines = [header, "-" * len(header)]
    for row in breakdown.rows:
        lead = "-" if row.best_alarm_lead is None else str(row.best_alarm_lead)
        lines.append(f"{row.scenario:<16}{row.outcome:<10}{row.alarm_score:>8.1f}"
                     f"{lead:>11}{row.t_bar:>7}{row.operation_score:>8.1f}"
                     f"{row.combined:>10.1f}")
    lines.append("-" * len(header))
    lines.append(f"{'MEAN':<16}{'':<10}{breakdown.mean_alarm:>8.1f}{'':>11}{'':>7}"
                 f"{breakdown.mean_operation:>8.1f}{breakdown.mean_combined:>10.1f}")
    return "\n".join(lines)


def stats_text(stats: BehaviorStats) -> str:
    return "\n".join([
        f"episodes:                 {stats.episodes}",
        f"alarms per day:           {stats.alarms_per_day:.2f}",
        f"mean attention budget:    {stats.mean_budget:.2f}",
        f"budget below 1:           {100.0 * stats.frac_steps_budget_below_1:.1f}% of steps",
        f"actions per week (mean):  {stats.actions_per_week_mean:.1f}",
        f"actions per week (max):   {stats.actions_per_week_max:.1f}",
    ])


def write_timeline_svg(series: TimelineSeries, path: str | Path) -> None:
    """Attention budget, topology distance and attack windows over time."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, (ax_alpha, ax_topo) = plt.subplots(
        2, 1, sharex=True, figsize=(10, 5),
        gridspec_kw={"height_ratios": [2, 1]})
    steps = list(range(len(series.alpha)))
    ax_alpha.plot(steps, series.alpha, lw=0.9, color="tab:blue")
    ax_alpha.set_ylabel("attention budget")
    ax_alpha.set_ylim(-0.1, 3.3)
    for start, end, line in series.attack_windows:
        for ax in (ax_alpha, ax_topo):
            ax.axvspan(start, end, color="tab:red", alpha=0.15, lw=0)
    for step in series.alarm_steps:
        ax_alpha.axvline(step, color="tab:orange", lw=0.8, alpha=0.8)
    ax_topo.step(steps, series.topo_distance, where="post", lw=0.9,
                 color="tab:green")
    ax_topo.set_ylabel("topology distance")
    ax_topo.set_xlabel("step (5 min)")
    fig.suptitle(series.scenario or "episode timeline")
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


# ------------------------------------------------------------------ replay

@dataclass
class ReplayVerdict:
    ok: bool
    divergence_step: int | None = None
    field: str | None = None
    detail: str = ""


def replay(log_path: str | Path, case_override: str | None = None) -> ReplayVerdict:
    """Re-execute the logged actions under the logged seed and check the
    per-step state hashes (then alpha, rho, attacked, tripped)."""
    log = read_episode_log(log_path)
    case = resolve_case(case_override or log.header["case"])
    ref = log.header["scenario"]
    if ref.get("kind") == "named":
        ref = {"kind": "file", "path": ref["name"]}
    scenario = resolve_scenario(ref, case)
    params = EnvParams(**log.header["params"])
    schedule = log.header.get("attack_schedule")
    if schedule is not None:
        schedule = [tuple(x) for x in schedule]
    env = GridEnv(case, scenario, params=params, seed=log.header["seed"],
                  attack_schedule=schedule)
    env.reset()

    for i, record in enumerate(log.steps):
        if i > 0:
            action = Action.from_json(record.action)
            alarm = Alarm.for_zones(record.alarm) if record.alarm is not None else None
            if env.finished:
                return ReplayVerdict(ok=False, divergence_step=record.step,
                                     field="finished",
                                     detail="episode ended before the log did")
            env.step(action, alarm)
        ours = env.records[-1]
        for fieldname in ("state_hash", "alpha", "rho", "attacked", "tripped",
                          "alarm_rejected"):
            if getattr(ours, fieldname) != getattr(record, fieldname):
                return ReplayVerdict(ok=False, divergence_step=record.step,
                                     field=fieldname,
                                     detail=f"logged {getattr(record, fieldname)!r}"
                                            f" vs replayed {getattr(ours, fieldname)!r}")
    terminal = log.terminal
    if terminal is not None:
        replayed = env.episode_log().terminal
        if replayed is None or replayed.outcome != terminal.outcome:
            return ReplayVerdict(ok=False, divergence_step=None, field="outcome",
                                 detail="terminal outcome differs")
    return ReplayVerdict(ok=True)
