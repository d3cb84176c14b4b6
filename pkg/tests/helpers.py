"""Builders for small ad-hoc cases used across the test suite."""

from __future__ import annotations

from gridward.grid_model import (
    CONNECTED,
    Generator,
    GridCase,
    Line,
    Load,
    Substation,
    Topology,
    ZoneId,
)


def make_case(name: str,
              subs: list[tuple[int, int]],
              lines: list[tuple[str, int, int, float, float, float]],
              gens: list[tuple[str, int, str, float, float]],
              loads: list[tuple[str, int]],
              attackable: list[str] | None = None,
              base_mva: float = 100.0) -> GridCase:
    """Programmatic GridCase.

    subs: (id, zone); lines: (id, from, to, x, r, limit);
    gens: (id, sub, kind, p_max, ramp), first one is the slack;
    loads: (id, sub).
    """
    case = GridCase(
        name=name,
        base_mva=base_mva,
        step_minutes=5,
        zones=[ZoneId(0, "z0"), ZoneId(1, "z1"), ZoneId(2, "z2")],
        substations=[Substation(i, f"sub{i}", z) for i, z in subs],
        lines=[Line(i, a, b, x, r, lim) for i, a, b, x, r, lim in lines],
        generators=[Generator(i, s, kind, 0.0, p_max, ramp, 40.0, slack=(n == 0))
                    for n, (i, s, kind, p_max, ramp) in enumerate(gens)],
        loads=[Load(i, s) for i, s in loads],
        attackable_line_ids=attackable or [lines[0][0]],
        reference_topology=Topology({}, {}),
    )
    case.reference_topology = Topology(
        {key: 1 for key in case.all_element_keys()},
        {line.id: CONNECTED for line in case.lines},
    )
    return case


def two_bus_case() -> GridCase:
    return make_case(
        "two_bus",
        subs=[(1, 0), (2, 1)],
        lines=[("LA", 1, 2, 0.1, 0.0, 150.0)],
        gens=[("G", 1, "dispatchable", 200.0, 50.0)],
        loads=[("D", 2)],
    )


def triangle_case() -> GridCase:
    """3-bus triangle with equal reactances, gen at 1, load at 3."""
    return make_case(
        "triangle",
        subs=[(1, 0), (2, 1), (3, 2)],
        lines=[("L12", 1, 2, 0.1, 0.0, 100.0),
               ("L13", 1, 3, 0.1, 0.0, 100.0),
               ("L23", 2, 3, 0.1, 0.0, 100.0)],
        gens=[("G", 1, "dispatchable", 200.0, 50.0)],
        loads=[("D", 3)],
    )
