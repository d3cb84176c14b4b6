"""Load / generation time series: file loading and synthetic generation.

A scenario is a week (2016 steps at 5 minutes) of per-load consumption and
per-generator power. For renewables the series is the *available* power;
the environment applies curtailment on top. Dispatchable series are
setpoints that already track residual load, leaving the slack generator
only small imbalances to absorb.

The synthetic generator is deliberately simple and fully deterministic
given its seed: daily sinusoid x weekly modulation x lognormal noise for
loads, a daylight bell for solar, mean-reverting noise for wind, and
dispatch scaled to residual load. Shapes are documented here so users can
author equivalent CSVs by hand instead.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .grid_model import RENEWABLE_KINDS, GridCase

STEPS_PER_DAY = 288
WEEK_STEPS = 7 * STEPS_PER_DAY


class ChronicsError(ValueError):
    pass


@dataclass
class Scenario:
    name: str
    n_steps: int
    load_ids: list[str]
    gen_ids: list[str]
    load_p: np.ndarray                    # (n_steps, n_loads) MW
    gen_p: np.ndarray                     # (n_steps, n_gens) MW
    maintenance: list[tuple[str, int, int]] = field(default_factory=list)

    def loads_at(self, step: int) -> dict[str, float]:
        return {lid: float(self.load_p[step, i]) for i, lid in enumerate(self.load_ids)}

    def gens_at(self, step: int) -> dict[str, float]:
        return {gid: float(self.gen_p[step, i]) for i, gid in enumerate(self.gen_ids)}

    def total_load(self, step: int) -> float:
        return float(self.load_p[step].sum())

    def maintenance_out(self, step: int) -> set[str]:
        return {lid for lid, start, dur in self.maintenance if start <= step < start + dur}


@dataclass
class ScenarioConfig:
    seed: int
    peak_load: dict[str, float]           # MW per load
    n_steps: int = WEEK_STEPS
    renewable_share_target: float = 0.20  # fraction of load energy
    load_noise: float = 0.02              # lognormal sigma per step
    renewable_noise: float = 0.10
    loss_margin: float = 0.02             # dispatch headroom over load

    def __post_init__(self):
        if not 0.0 <= self.renewable_share_target <= 1.0:
            raise ChronicsError("renewable_share_target must be in [0, 1]")
        if self.n_steps <= 0:
            raise ChronicsError("n_steps must be positive")


# ------------------------------------------------------------------ files

def _read_matrix(path: Path) -> tuple[list[str], np.ndarray]:
    with path.open() as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header:
            raise ChronicsError(f"{path}: empty file")
        rows = [[float(x) for x in row] for row in reader if row]
    for i, row in enumerate(rows):
        if len(row) != len(header):
            raise ChronicsError(f"{path}: row {i + 1} has {len(row)} values, "
                                f"expected {len(header)}")
    return header, np.array(rows, dtype=float)


def load_scenario(path: str | Path, case: GridCase) -> Scenario:
    """Read a chronics directory (load_p.csv, gen_p.csv, maintenance.csv)."""
    path = Path(path)
    load_header, load_p = _read_matrix(path / "load_p.csv")
    gen_header, gen_p = _read_matrix(path / "gen_p.csv")

    problems = []
    case_loads = [d.id for d in case.loads]
    case_gens = [g.id for g in case.generators]
    if set(load_header) != set(case_loads):
        problems.append(f"load_p.csv columns {load_header} do not match case loads {case_loads}")
    if set(gen_header) != set(case_gens):
        problems.append(f"gen_p.csv columns {gen_header} do not match case generators {case_gens}")
    if len(load_p) != len(gen_p):
        problems.append(f"length mismatch: {len(load_p)} load rows vs {len(gen_p)} gen rows")
    if problems:
        raise ChronicsError(f"{path}: " + "; ".join(problems))

    # canonical column order = case order
    load_p = load_p[:, [load_header.index(lid) for lid in case_loads]]
    gen_p = gen_p[:, [gen_header.index(gid) for gid in case_gens]]
    n_steps = len(load_p)

    if np.any(load_p < 0):
        raise ChronicsError(f"{path}: negative load values")
    for j, gid in enumerate(case_gens):
        gen = case.gen_by_id[gid]
        if np.any(gen_p[:, j] < -1e-9) or np.any(gen_p[:, j] > gen.p_max + 1e-9):
            raise ChronicsError(f"{path}: gen_p for {gid} outside [0, p_max]")

    maintenance: list[tuple[str, int, int]] = []
    maint_file = path / "maintenance.csv"
    if maint_file.exists():
        with maint_file.open() as fh:
            reader = csv.DictReader(fh)
            for row in reader:
                lid = row["line_id"]
                start, dur = int(row["start_step"]), int(row["duration_steps"])
                if lid not in case.line_by_id:
                    raise ChronicsError(f"{path}: maintenance on unknown line '{lid}'")
                if not (0 <= start < n_steps) or dur <= 0 or start + dur > n_steps:
                    raise ChronicsError(f"{path}: maintenance window [{start}, {start + dur}) "
                                        f"outside [0, {n_steps})")
                maintenance.append((lid, start, dur))

    return Scenario(name=path.name, n_steps=n_steps, load_ids=case_loads,
                    gen_ids=case_gens, load_p=load_p, gen_p=gen_p,
                    maintenance=maintenance)


def save_scenario(scenario: Scenario, path: str | Path) -> None:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    with (path / "load_p.csv").open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(scenario.load_ids)
        for row in scenario.load_p:
            writer.writerow([repr(float(x)) for x in row])
    with (path / "gen_p.csv").open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(scenario.gen_ids)
        for row in scenario.gen_p:
            writer.writerow([repr(float(x)) for x in row])
    if scenario.maintenance:
        with (path / "maintenance.csv").open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["line_id", "start_step", "duration_steps"])
            writer.writerows(scenario.maintenance)


# -------------------------------------------------------------- synthesis

def _daily_shape(hours: np.ndarray) -> np.ndarray:
    # evening-peaked residential-ish curve, min ~0.5 of peak at night
    return 0.75 + 0.25 * np.sin(2.0 * np.pi * (hours - 9.0) / 24.0)


def _solar_shape(hours: np.ndarray) -> np.ndarray:
    # zero outside the 06:00-18:00 daylight window
    angle = np.pi * (hours - 12.0) / 12.0
    shape = np.cos(angle)
    shape[np.abs(hours - 12.0) >= 6.0] = 0.0
    return np.clip(shape, 0.0, None)


def generate_scenario(case: GridCase, cfg: ScenarioConfig) -> Scenario:
    """Deterministic synthetic week; see module docstring for the shapes."""
    rng = np.random.default_rng(cfg.seed)
    n = cfg.n_steps
    t = np.arange(n)
    hours = (t % STEPS_PER_DAY) / (STEPS_PER_DAY / 24.0)
    days = t // STEPS_PER_DAY
    weekly = np.where((days % 7) >= 5, 0.85, 1.0)

    load_ids = [d.id for d in case.loads]
    missing = [lid for lid in load_ids if lid not in cfg.peak_load]
    if missing:
        raise ChronicsError(f"peak_load missing entries for {missing}")

    dispatchables = [g for g in case.generators if g.kind == "dispatchable"]
    disp_capacity = sum(g.p_max for g in dispatchables)
    worst_load = sum(cfg.peak_load[lid] for lid in load_ids) * (1.0 + cfg.loss_margin)
    if worst_load > disp_capacity:
        raise ChronicsError(
            f"infeasible config: peak load {worst_load:.1f} MW exceeds dispatchable "
            f"capacity {disp_capacity:.1f} MW")

    load_p = np.empty((n, len(load_ids)))
    daily = _daily_shape(hours)
    for j, lid in enumerate(load_ids):
        noise = np.exp(rng.normal(0.0, cfg.load_noise, size=n) - cfg.load_noise**2 / 2)
        load_p[:, j] = cfg.peak_load[lid] * daily * weekly * noise

    gen_ids = [g.id for g in case.generators]
    gen_p = np.zeros((n, len(gen_ids)))

    raw_renewable = np.zeros((n, len(gen_ids)))
    for j, gen in enumerate(case.generators):
        if gen.kind == "solar":
            day_factor = np.exp(rng.normal(0.0, cfg.renewable_noise, size=n // STEPS_PER_DAY + 1))
            raw = gen.p_max * _solar_shape(hours) * day_factor[days]
        elif gen.kind == "wind":
            phi = 0.995
            z = np.empty(n)
            z[0] = rng.normal()
            eps = rng.normal(size=n)
            for i in range(1, n):
                z[i] = phi * z[i - 1] + np.sqrt(1 - phi * phi) * eps[i]
            raw = gen.p_max * np.clip(0.45 + 0.25 * z, 0.0, 1.0)
        else:
            continue
        raw_renewable[:, j] = raw

    total_load = load_p.sum(axis=1)
    target_energy = cfg.renewable_share_target * total_load.sum()
    for _ in range(2):  # one rescale after the caps bite, if they do
        raw_sum = raw_renewable.sum()
        if raw_sum <= 0.0 or target_energy <= 0.0:
            raw_renewable[:] = 0.0
            break
        raw_renewable *= target_energy / raw_sum
        for j, gen in enumerate(case.generators):
            if gen.kind in RENEWABLE_KINDS:
                np.clip(raw_renewable[:, j], 0.0, gen.p_max, out=raw_renewable[:, j])
        # keep per-step renewables below load so the residual stays positive
        step_ren = raw_renewable.sum(axis=1)
        excess = step_ren > 0.95 * total_load
        if np.any(excess):
            scale = np.ones(n)
            scale[excess] = 0.95 * total_load[excess] / step_ren[excess]
            raw_renewable *= scale[:, None]
        if abs(raw_renewable.sum() - target_energy) < 0.005 * max(total_load.sum(), 1.0):
            break

    achieved = raw_renewable.sum() / total_load.sum() if total_load.sum() > 0 else 0.0
    if abs(achieved - cfg.renewable_share_target) > 0.05:
        raise ChronicsError(
            f"infeasible config: achieved renewable share {achieved:.3f} not within "
            f"5pp of target {cfg.renewable_share_target:.3f}")

    for j, gen in enumerate(case.generators):
        if gen.kind in RENEWABLE_KINDS:
            gen_p[:, j] = raw_renewable[:, j]

    residual = total_load * (1.0 + cfg.loss_margin) - raw_renewable.sum(axis=1)
    for j, gen in enumerate(case.generators):
        if gen.kind != "dispatchable":
            continue
        share = gen.p_max / disp_capacity
        gen_p[:, j] = np.clip(residual * share, gen.p_min, gen.p_max)

    return Scenario(name=f"gen-{cfg.seed}", n_steps=n, load_ids=load_ids,
                    gen_ids=gen_ids, load_p=load_p, gen_p=gen_p)
