"""DC power flow, N-1 screening and the cascading-failure engine.

The solver uses the linearised B-theta formulation: per electrical island,
reduced susceptance matrix times angle vector equals net injection in
per-unit, with the island's reference node at angle 0 absorbing any
imbalance. Line flow is (theta_from - theta_to) / x, loading rho is
|flow| / thermal_limit.

Islands that contain load but no generation (and islands whose linear
system is singular) cannot be served; they are reported on the solution
and drive the game-over rule upstream.

The cascade engine trips lines within a single step until a fixpoint:
immediate trips at rho >= hard threshold, timed trips after a line has
been above rho 1 for `overload_trip_steps` consecutive steps, and on any
re-solve after a trip every line above rho 1 trips immediately.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid_model import (
    CONNECTED,
    DISCONNECTED,
    Component,
    GridCase,
    NodeGraph,
    Topology,
    connected_components,
    electrical_nodes,
    gen_key,
    load_key,
)


@dataclass
class Injections:
    """Raw generation targets and load draws in MW (pre slack adjustment)."""

    p_gen: dict[str, float]
    p_load: dict[str, float]

    def copy(self) -> Injections:
        return Injections(dict(self.p_gen), dict(self.p_load))


@dataclass
class FlowSolution:
    theta: list[float]                  # radians, aligned with graph.nodes
    p_flow: dict[str, float]            # MW, signed from->to; 0 when open
    rho: dict[str, float]               # |p_flow| / thermal_limit
    converged: bool
    graph: NodeGraph
    unserved_subs: list[int]            # substations with load in dead islands
    gen_output: dict[str, float]        # effective MW incl. slack absorption

    def max_rho(self) -> float:
        return max(self.rho.values(), default=0.0)


@dataclass
class OverloadTimers:
    """Consecutive steps each line has spent above rho 1."""

    steps_overloaded: dict[str, int]

    @classmethod
    def zeros(cls, case: GridCase) -> OverloadTimers:
        return cls({line.id: 0 for line in case.lines})

    def copy(self) -> OverloadTimers:
        return OverloadTimers(dict(self.steps_overloaded))


@dataclass
class CascadeResult:
    tripped_lines: list[str]            # in trip order (pass by pass)
    final_solution: FlowSolution
    load_lost: bool
    lost_load_substations: list[int]
    lost_load_mw: dict[int, float]
    topology_after: Topology            # trips applied to intent status


def _island_reference(case: GridCase, graph: NodeGraph, component: Component) -> int:
    """Reference node of an island: slack's node if present, else the
    lowest-numbered node holding a generator, else the lowest node."""
    slack_node = graph.node_of_element.get(gen_key(case.slack_gen.id))
    if slack_node in component.node_ids:
        return slack_node
    gen_nodes = sorted(
        graph.node_of_element[gen_key(g.id)]
        for g in case.generators
        if graph.node_of_element[gen_key(g.id)] in component.node_ids
    )
    if gen_nodes:
        return gen_nodes[0]
    return component.node_ids[0]


def _island_has_generation(case: GridCase, graph: NodeGraph, component: Component) -> bool:
    members = set(component.node_ids)
    return any(graph.node_of_element[gen_key(g.id)] in members for g in case.generators)


def solve_dc(case: GridCase, topology: Topology, inj: Injections,
             forced_out: frozenset[str] | set[str] = frozenset()) -> FlowSolution:
    """Solve DC power flow on the effective topology.

    Never raises on degenerate islands: a singular island is flagged
    non-converged and reported unserved alongside generation-free islands.
    """
    graph = electrical_nodes(case, topology, forced_out)
    components = connected_components(graph)

    net_mw = np.zeros(graph.n_nodes)
    for gen in case.generators:
        net_mw[graph.node_of_element[gen_key(gen.id)]] += inj.p_gen.get(gen.id, 0.0)
    for load in case.loads:
        net_mw[graph.node_of_element[load_key(load.id)]] -= inj.p_load.get(load.id, 0.0)

    theta = np.zeros(graph.n_nodes)
    dead_nodes: set[int] = set()
    converged = True
    gen_output = {g.id: inj.p_gen.get(g.id, 0.0) for g in case.generators}

    for component in components:
        members = component.node_ids
        has_load = any(
            graph.node_of_element[load_key(d.id)] in set(members) and
            inj.p_load.get(d.id, 0.0) > 0.0
            for d in case.loads
        )
        if not _island_has_generation(case, graph, component):
            if has_load:
                dead_nodes.update(members)
            continue  # nothing to solve: no sources, theta stays 0

        ref = _island_reference(case, graph, component)
        members_set = set(members)
        others = [n for n in members if n != ref]
        if others:
            pos = {n: i for i, n in enumerate(others)}
            b_red = np.zeros((len(others), len(others)))
            for line_id, a, b in graph.edges:
                if a not in members_set:
                    continue
                susceptance = 1.0 / case.line_by_id[line_id].reactance
                if a != ref:
                    b_red[pos[a], pos[a]] += susceptance
                if b != ref:
                    b_red[pos[b], pos[b]] += susceptance
                if a != ref and b != ref:
                    b_red[pos[a], pos[b]] -= susceptance
                    b_red[pos[b], pos[a]] -= susceptance
            p_red = np.array([net_mw[n] / case.base_mva for n in others])
            try:
                theta_red = np.linalg.solve(b_red, p_red)
            except np.linalg.LinAlgError:
                converged = False
                dead_nodes.update(members)
                continue
            if not np.all(np.isfinite(theta_red)):
                converged = False
                dead_nodes.update(members)
                continue
            for n, i in pos.items():
                theta[n] = theta_red[i]
        # slack absorption: reference injection becomes -sum(others)
        absorbed = -float(sum(net_mw[n] for n in others)) - net_mw[ref]
        ref_gens = [g for g in case.generators
                    if graph.node_of_element[gen_key(g.id)] == ref]
        if ref_gens:
            anchor = next((g for g in ref_gens if g.slack), ref_gens[0])
            gen_output[anchor.id] = float(gen_output[anchor.id] + absorbed)

    for gen in case.generators:
        if graph.node_of_element[gen_key(gen.id)] in dead_nodes:
            gen_output[gen.id] = 0.0

    p_flow: dict[str, float] = {}
    rho: dict[str, float] = {}
    open_lines = {line.id for line in case.lines} - {e[0] for e in graph.edges}
    for line_id, a, b in graph.edges:
        if a in dead_nodes or b in dead_nodes:
            p_flow[line_id] = 0.0
            rho[line_id] = 0.0
            continue
        line = case.line_by_id[line_id]
        flow = float((theta[a] - theta[b]) / line.reactance * case.base_mva)
        p_flow[line_id] = flow
        rho[line_id] = abs(flow) / line.thermal_limit
    for line_id in open_lines:
        p_flow[line_id] = 0.0
        rho[line_id] = 0.0

    unserved = sorted({
        case.load_by_id[d.id].substation
        for d in case.loads
        if graph.node_of_element[load_key(d.id)] in dead_nodes
        and inj.p_load.get(d.id, 0.0) > 0.0
    })
    return FlowSolution(theta=[float(t) for t in theta], p_flow=p_flow, rho=rho,
                        converged=converged, graph=graph,
                        unserved_subs=unserved, gen_output=gen_output)


def losses_proxy(case: GridCase, sol: FlowSolution) -> float:
    """Quadratic I^2 R loss stand-in, MW: sum r * (p/base)^2 * base."""
    total = 0.0
    for line in case.lines:
        p_pu = sol.p_flow.get(line.id, 0.0) / case.base_mva
        total += line.resistance * p_pu * p_pu * case.base_mva
    return total


def simulate_n1(case: GridCase, topology: Topology, inj: Injections, line_id: str,
                forced_out: frozenset[str] | set[str] = frozenset()) -> FlowSolution:
    """Flows with one currently-connected line removed; state untouched."""
    if topology.line_status[line_id] != CONNECTED or line_id in forced_out:
        raise ValueError(f"line '{line_id}' is already disconnected")
    return solve_dc(case, topology, inj, frozenset(forced_out) | {line_id})


def run_cascade(case: GridCase, topology: Topology, inj: Injections,
                timers: OverloadTimers,
                forced_out: frozenset[str] | set[str] = frozenset(),
                hard_overload_rho: float = 2.0,
                overload_trip_steps: int = 3) -> tuple[CascadeResult, OverloadTimers]:
    """One step of the overload/trip dynamics, run to its intra-step fixpoint.

    Pass 1 uses the step's solved flows: lines at rho >= hard threshold trip
    at once, timers advance (reset at rho <= 1), and timer expiry trips.
    Every subsequent pass after a re-solve trips any line above rho 1
    immediately. Trips within one pass are simultaneous; the reported order
    is pass by pass, case line order within a pass.
    """
    line_order = {line.id: i for i, line in enumerate(case.lines)}
    topo = topology.copy()
    new_timers = timers.copy()
    tripped: list[str] = []

    sol = solve_dc(case, topo, inj, forced_out)

    def effectively_connected(line_id: str) -> bool:
        return topo.line_status[line_id] == CONNECTED and line_id not in forced_out

    # pass 1: hard trips + timer bookkeeping from the step's flows
    for line in case.lines:
        if not effectively_connected(line.id):
            new_timers.steps_overloaded[line.id] = 0
            continue
        if sol.rho[line.id] > 1.0:
            new_timers.steps_overloaded[line.id] = timers.steps_overloaded[line.id] + 1
        else:
            new_timers.steps_overloaded[line.id] = 0
    trips_now = sorted(
        (lid for lid in sol.rho
         if effectively_connected(lid) and (
             sol.rho[lid] >= hard_overload_rho
             or new_timers.steps_overloaded[lid] >= overload_trip_steps)),
        key=line_order.get,
    )

    passes = 0
    while trips_now and passes <= len(case.lines):
        passes += 1
        for lid in trips_now:
            topo.line_status[lid] = DISCONNECTED
            new_timers.steps_overloaded[lid] = 0
            tripped.append(lid)
        sol = solve_dc(case, topo, inj, forced_out)
        trips_now = sorted(
            (lid for lid in sol.rho
             if effectively_connected(lid) and sol.rho[lid] > 1.0),
            key=line_order.get,
        )

    lost_mw: dict[int, float] = {}
    for load in case.loads:
        if load.substation in sol.unserved_subs:
            lost_mw[load.substation] = lost_mw.get(load.substation, 0.0) \
                + inj.p_load.get(load.id, 0.0)
    result = CascadeResult(
        tripped_lines=tripped,
        final_solution=sol,
        load_lost=bool(sol.unserved_subs),
        lost_load_substations=list(sol.unserved_subs),
        lost_load_mw=lost_mw,
        topology_after=topo,
    )
    return result, new_timers
