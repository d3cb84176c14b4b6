"""Command-line interface: run episodes/suites, score and analyze logs,
replay-verify them, and serve the operator bridge.

Every option can also come from a GRIDWARD_* environment variable (e.g.
GRIDWARD_JOBS=8 gridward run ...).
"""

from __future__ import annotations

import sys
from pathlib import Path

import click

from .agents import AGENT_NAMES
from .environment import EnvParams
from .episode_log import read_episode_log
from .runner import (
    RunConfig,
    compute_baselines,
    expand_suite_config,
    replay as replay_log,
    resolve_case,
    resolve_scenario,
    run_suite,
    score_table_csv,
    score_table_text,
    stats_text,
    write_timeline_svg,
)
from .scoring import ScoreBreakdown, episode_stats, score_episode


@click.group()
def main():
    """Deterministic grid-operation simulator with alarm scoring."""


@main.command()
@click.option("--case", "case_ref", envvar="GRIDWARD_CASE", default=None,
              help="Case file path or bundled name (toy5, case14).")
@click.option("--scenario", "scenarios", multiple=True,
              help="Chronics directory (repeatable).")
@click.option("--suite", "suite_path", default=None,
              help="Suite config JSON (generator shorthand or explicit refs).")
@click.option("--agent", default="do-nothing", envvar="GRIDWARD_AGENT",
              type=click.Choice(AGENT_NAMES))
@click.option("--seed", default=0, envvar="GRIDWARD_SEED", type=int,
              help="Suite seed; per-scenario seeds derive from it.")
@click.option("--attack-schedule", default=None, envvar="GRIDWARD_ATTACK_SCHEDULE",
              help="Pinned attack schedule CSV for fair cross-agent runs.")
@click.option("--out", "out_dir", default=None, envvar="GRIDWARD_OUT",
              help="Directory for logs and reports.")
@click.option("--jobs", default=1, envvar="GRIDWARD_JOBS", type=int)
@click.option("--no-opponent", is_flag=True, help="Disable attacks.")
@click.option("--svg", is_flag=True, help="Also write per-episode timeline SVGs.")
@click.option("--curated-actions", default=None, envvar="GRIDWARD_CURATED_ACTIONS",
              help="Candidate action file for the expert agent (one JSON action per line).")
def run(case_ref, scenarios, suite_path, agent, seed, attack_schedule, out_dir,
        jobs, no_opponent, svg, curated_actions):
    """Run an agent over one or more scenarios and report scores."""
    if suite_path:
        suite_case, refs = expand_suite_config(suite_path)
        case_ref = case_ref or suite_case
    else:
        refs = [{"kind": "file", "path": p} for p in scenarios]
    if not case_ref:
        raise click.UsageError("--case is required (or provided by --suite)")
    if not refs:
        raise click.UsageError("give --scenario at least once, or --suite")
    cfg = RunConfig(case=case_ref, scenarios=refs, agent=agent, suite_seed=seed,
                    out_dir=out_dir, jobs=jobs, attack_schedule=attack_schedule,
                    opponent=not no_opponent, curated_actions=curated_actions)
    result = run_suite(cfg)
    click.echo(score_table_text(result.breakdown))
    click.echo("")
    click.echo(stats_text(result.stats))
    if svg and out_dir:
        for series in result.stats.series:
            write_timeline_svg(series, Path(out_dir) / f"{series.scenario}.svg")


@main.command()
@click.option("--logs", "logs_dir", required=True, envvar="GRIDWARD_LOGS",
              help="Directory of episode logs (*.jsonl).")
@click.option("--case", "case_ref", default=None,
              help="Override the case reference stored in the logs.")
@click.option("--out", "out_dir", default=None, envvar="GRIDWARD_OUT")
def score(logs_dir, case_ref, out_dir):
    """Score previously recorded episode logs (recomputes DN baselines)."""
    paths = sorted(Path(logs_dir).glob("*.jsonl"))
    if not paths:
        raise click.UsageError(f"no *.jsonl logs under {logs_dir}")
    rows = []
    for path in paths:
        log = read_episode_log(path)
        case = resolve_case(case_ref or log.header["case"])
        scenario = resolve_scenario(log.header["scenario"], case)
        schedule = log.header.get("attack_schedule")
        if schedule is not None:
            schedule = [tuple(x) for x in schedule]
        baselines = compute_baselines(case, scenario, log.header["seed"],
                                      EnvParams(**log.header["params"]), schedule)
        row = score_episode(log, case, baselines)
        row.scenario = path.stem
        rows.append(row)
    breakdown = ScoreBreakdown(rows=rows)
    click.echo(score_table_text(breakdown))
    if out_dir:
        Path(out_dir).mkdir(parents=True, exist_ok=True)
        (Path(out_dir) / "scores.csv").write_text(score_table_csv(breakdown))


@main.command()
@click.option("--logs", "logs_dir", required=True, envvar="GRIDWARD_LOGS")
@click.option("--svg", "svg_dir", default=None,
              help="Directory for Fig-style timeline SVGs.")
def stats(logs_dir, svg_dir):
    """Behavior statistics (alarms/day, budget, actions/week) over logs."""
    paths = sorted(Path(logs_dir).glob("*.jsonl"))
    if not paths:
        raise click.UsageError(f"no *.jsonl logs under {logs_dir}")
    logs = [read_episode_log(p) for p in paths]
    result = episode_stats(logs)
    click.echo(stats_text(result))
    if svg_dir:
        Path(svg_dir).mkdir(parents=True, exist_ok=True)
        for path, series in zip(paths, result.series):
            write_timeline_svg(series, Path(svg_dir) / f"{path.stem}.svg")


@main.command()
@click.option("--log", "log_path", required=True, envvar="GRIDWARD_LOG")
@click.option("--case", "case_ref", default=None)
def replay(log_path, case_ref):
    """Re-execute a log under its recorded seed and verify state hashes."""
    verdict = replay_log(log_path, case_override=case_ref)
    if verdict.ok:
        click.echo("replay ok")
    else:
        click.echo(f"replay DIVERGED at step {verdict.divergence_step} "
                   f"({verdict.field}): {verdict.detail}")
        sys.exit(1)


@main.command()
@click.option("--host", default="127.0.0.1", envvar="GRIDWARD_HOST")
@click.option("--port", default=8321, envvar="GRIDWARD_PORT", type=int)
def serve(host, port):
    """Start the operator bridge service (HTTP + WebSocket)."""
    import uvicorn

    from .service import create_app
    uvicorn.run(create_app(), host=host, port=port)


if __name__ == "__main__":
    main()
