"""Static grid description and topology handling.

A case is a set of substations, lines, generators and loads. Each substation
has two busbars; every element (line end, generator, load) sits on one of
them. The reference topology puts everything on busbar 1 with all lines
connected. Splitting a substation across its two busbars creates distinct
electrical nodes, which is what makes nodal reconfiguration a useful action.

Cases are loaded from a single JSON document (see `load_case`); all powers
are MW, reactance/resistance per-unit on the declared `base_mva`.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

CONNECTED = "connected"
DISCONNECTED = "disconnected"

GEN_KINDS = ("dispatchable", "wind", "solar")
RENEWABLE_KINDS = ("wind", "solar")


class CaseError(ValueError):
    """Raised when a case file cannot be parsed or fails validation."""

    def __init__(self, message: str, violations: list[str] | None = None):
        self.violations = violations or []
        if self.violations:
            message = message + "\n  - " + "\n  - ".join(self.violations)
        super().__init__(message)


class TopologyError(KeyError):
    """Raised when a topology action references an unknown element."""


@dataclass(frozen=True)
class ZoneId:
    index: int
    name: str


@dataclass(frozen=True)
class Substation:
    id: int
    name: str
    zone: int


@dataclass(frozen=True)
class Line:
    id: str
    from_sub: int
    to_sub: int
    reactance: float      # pu on base_mva, > 0
    resistance: float     # pu, >= 0
    thermal_limit: float  # MW


@dataclass(frozen=True)
class Generator:
    id: str
    substation: int
    kind: str             # dispatchable | wind | solar
    p_min: float
    p_max: float
    ramp: float           # MW per step
    marginal_cost: float  # currency per MWh
    slack: bool = False


@dataclass(frozen=True)
class Load:
    id: str
    substation: int


def line_end_key(line_id: str, sub_id: int) -> str:
    return f"line:{line_id}:{sub_id}"


def gen_key(gen_id: str) -> str:
    return f"gen:{gen_id}"


def load_key(load_id: str) -> str:
    return f"load:{load_id}"


@dataclass
class Topology:
    """Busbar assignment per element plus agent-intent line statuses.

    Treated as an immutable value: mutate only through `apply_topology`,
    which returns a fresh instance.
    """

    busbar_of_element: dict[str, int]
    line_status: dict[str, str]

    def copy(self) -> Topology:
        return Topology(dict(self.busbar_of_element), dict(self.line_status))

    def is_connected(self, line_id: str) -> bool:
        return self.line_status[line_id] == CONNECTED


@dataclass(frozen=True)
class TopologyAction:
    """Requested busbar reassignments and/or line status changes."""

    set_busbars: dict[str, int] = field(default_factory=dict)
    set_line_status: dict[str, str] = field(default_factory=dict)

    def is_identity(self) -> bool:
        return not self.set_busbars and not self.set_line_status


@dataclass
class GridCase:
    name: str
    base_mva: float
    step_minutes: int
    zones: list[ZoneId]
    substations: list[Substation]
    lines: list[Line]
    generators: list[Generator]
    loads: list[Load]
    attackable_line_ids: list[str]
    reference_topology: Topology

    def __post_init__(self):
        self.line_by_id = {l.id: l for l in self.lines}
        self.sub_by_id = {s.id: s for s in self.substations}
        self.gen_by_id = {g.id: g for g in self.generators}
        self.load_by_id = {d.id: d for d in self.loads}

    @property
    def slack_gen(self) -> Generator:
        return next(g for g in self.generators if g.slack)

    def zone_of_sub(self, sub_id: int) -> int:
        return self.sub_by_id[sub_id].zone

    def zones_of_line(self, line_id: str) -> set[int]:
        line = self.line_by_id[line_id]
        return {self.zone_of_sub(line.from_sub), self.zone_of_sub(line.to_sub)}

    def elements_of_sub(self, sub_id: int) -> list[str]:
        """Element keys attached to a substation, in a fixed order."""
        keys = []
        for line in self.lines:
            if line.from_sub == sub_id or line.to_sub == sub_id:
                keys.append(line_end_key(line.id, sub_id))
        for gen in self.generators:
            if gen.substation == sub_id:
                keys.append(gen_key(gen.id))
        for load in self.loads:
            if load.substation == sub_id:
                keys.append(load_key(load.id))
        return keys

    def all_element_keys(self) -> list[str]:
        keys = []
        for sub in self.substations:
            keys.extend(self.elements_of_sub(sub.id))
        return keys

    def sub_of_element(self, key: str) -> int:
        kind, rest = key.split(":", 1)
        if kind == "line":
            line_id, sub = rest.rsplit(":", 1)
            return int(sub)
        if kind == "gen":
            return self.gen_by_id[rest].substation
        if kind == "load":
            return self.load_by_id[rest].substation
        raise TopologyError(key)


# ---------------------------------------------------------------- loading

_TOP_KEYS = {"name", "base_mva", "step_minutes", "zones", "substations",
             "lines", "generators", "loads", "attackable_lines",
             "reference_topology"}


def _reject_unknown(obj: dict, allowed: set[str], where: str, problems: list[str]):
    for key in obj:
        if key not in allowed:
            problems.append(f"{where}: unknown key '{key}'")


def load_case(path: str | Path) -> GridCase:
    """Load and validate a case file; raises CaseError with all violations."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise CaseError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    if not isinstance(raw, dict):
        raise CaseError(f"{path}: case document must be a JSON object")

    problems: list[str] = []
    _reject_unknown(raw, _TOP_KEYS, str(path), problems)
    missing = _TOP_KEYS - set(raw)
    for key in sorted(missing):
        problems.append(f"{path}: missing top-level key '{key}'")
    if problems:
        raise CaseError(f"{path}: malformed case file", problems)

    zones = []
    for z in raw["zones"]:
        _reject_unknown(z, {"index", "name"}, "zones", problems)
        zones.append(ZoneId(index=int(z["index"]), name=str(z["name"])))
    substations = []
    for s in raw["substations"]:
        _reject_unknown(s, {"id", "name", "zone"}, f"substation {s.get('id')}", problems)
        substations.append(Substation(id=int(s["id"]), name=str(s.get("name", s["id"])),
                                      zone=int(s["zone"])))
    lines = []
    for l in raw["lines"]:
        _reject_unknown(l, {"id", "from_sub", "to_sub", "reactance", "resistance",
                            "thermal_limit"}, f"line {l.get('id')}", problems)
        lines.append(Line(id=str(l["id"]), from_sub=int(l["from_sub"]),
                          to_sub=int(l["to_sub"]), reactance=float(l["reactance"]),
                          resistance=float(l.get("resistance", 0.0)),
                          thermal_limit=float(l["thermal_limit"])))
    generators = []
    for g in raw["generators"]:
        _reject_unknown(g, {"id", "substation", "kind", "p_min", "p_max", "ramp",
                            "marginal_cost", "slack"}, f"generator {g.get('id')}", problems)
        generators.append(Generator(id=str(g["id"]), substation=int(g["substation"]),
                                    kind=str(g["kind"]), p_min=float(g["p_min"]),
                                    p_max=float(g["p_max"]), ramp=float(g["ramp"]),
                                    marginal_cost=float(g["marginal_cost"]),
                                    slack=bool(g.get("slack", False))))
    loads = []
    for d in raw["loads"]:
        _reject_unknown(d, {"id", "substation"}, f"load {d.get('id')}", problems)
        loads.append(Load(id=str(d["id"]), substation=int(d["substation"])))

    attackable = [str(x) for x in raw["attackable_lines"]]

    case = GridCase(
        name=str(raw["name"]),
        base_mva=float(raw["base_mva"]),
        step_minutes=int(raw["step_minutes"]),
        zones=zones,
        substations=substations,
        lines=lines,
        generators=generators,
        loads=loads,
        attackable_line_ids=attackable,
        reference_topology=Topology({}, {}),  # filled below
    )
    case.reference_topology = _build_reference_topology(case, raw["reference_topology"], problems)

    problems.extend(validate_case(case))
    if problems:
        raise CaseError(f"{path}: case validation failed", problems)
    return case


def _build_reference_topology(case: GridCase, raw_ref: dict, problems: list[str]) -> Topology:
    """Materialize the full reference topology (all busbar 1, all connected).

    Explicit entries in the file are allowed but must agree with the
    reference convention; anything else is a validation error.
    """
    _reject_unknown(raw_ref, {"busbar_of_element", "line_status"},
                    "reference_topology", problems)
    busbars = {key: 1 for key in case.all_element_keys()}
    statuses = {line.id: CONNECTED for line in case.lines}
    for key, bus in raw_ref.get("busbar_of_element", {}).items():
        if key not in busbars:
            problems.append(f"reference_topology: unknown element '{key}'")
        elif int(bus) != 1:
            problems.append(f"reference_topology: element '{key}' must sit on busbar 1")
    for line_id, status in raw_ref.get("line_status", {}).items():
        if line_id not in statuses:
            problems.append(f"reference_topology: unknown line '{line_id}'")
        elif status != CONNECTED:
            problems.append(f"reference_topology: line '{line_id}' must be connected")
    return Topology(busbars, statuses)


def validate_case(case: GridCase) -> list[str]:
    """All invariant violations of a case, empty when valid."""
    problems: list[str] = []
    sub_ids = {s.id for s in case.substations}
    line_ids = [l.id for l in case.lines]

    if len(sub_ids) != len(case.substations):
        problems.append("duplicate substation ids")
    if len(set(line_ids)) != len(line_ids):
        problems.append("duplicate line ids")

    zone_indices = [z.index for z in case.zones]
    if sorted(zone_indices) != [0, 1, 2]:
        problems.append(f"zones must have indices 0,1,2 exactly (got {sorted(zone_indices)})")
    for sub in case.substations:
        if sub.zone not in zone_indices:
            problems.append(f"substation {sub.id}: unknown zone {sub.zone}")

    for line in case.lines:
        if line.from_sub not in sub_ids:
            problems.append(f"line {line.id}: unknown substation {line.from_sub}")
        if line.to_sub not in sub_ids:
            problems.append(f"line {line.id}: unknown substation {line.to_sub}")
        if line.from_sub == line.to_sub:
            problems.append(f"line {line.id}: from_sub equals to_sub")
        if line.reactance <= 0:
            problems.append(f"line {line.id}: reactance must be > 0")
        if line.resistance < 0:
            problems.append(f"line {line.id}: resistance must be >= 0")
        if line.thermal_limit <= 0:
            problems.append(f"line {line.id}: thermal_limit must be > 0")

    slack_count = 0
    for gen in case.generators:
        if gen.substation not in sub_ids:
            problems.append(f"generator {gen.id}: unknown substation {gen.substation}")
        if gen.kind not in GEN_KINDS:
            problems.append(f"generator {gen.id}: unknown kind '{gen.kind}'")
        if not (0 <= gen.p_min <= gen.p_max):
            problems.append(f"generator {gen.id}: requires 0 <= p_min <= p_max")
        if gen.ramp < 0:
            problems.append(f"generator {gen.id}: ramp must be >= 0")
        slack_count += gen.slack
    if slack_count != 1:
        problems.append(f"exactly one slack generator required (got {slack_count})")

    for load in case.loads:
        if load.substation not in sub_ids:
            problems.append(f"load {load.id}: unknown substation {load.substation}")

    if not case.attackable_line_ids:
        problems.append("attackable_lines must be non-empty")
    for line_id in case.attackable_line_ids:
        if line_id not in set(line_ids):
            problems.append(f"attackable line '{line_id}' is not a line of the case")

    if case.base_mva <= 0:
        problems.append("base_mva must be > 0")
    if case.step_minutes <= 0:
        problems.append("step_minutes must be > 0")

    # reference topology coverage
    expected = set(case.all_element_keys())
    if set(case.reference_topology.busbar_of_element) != expected:
        problems.append("reference topology must assign every element")
    if set(case.reference_topology.line_status) != {l.id for l in case.lines}:
        problems.append("reference topology must give every line a status")
    return problems


# ------------------------------------------------------------- operations

def apply_topology(topology: Topology, action: TopologyAction) -> Topology:
    """Pure point mutation: returns a new topology, input untouched."""
    new = topology.copy()
    for key, busbar in action.set_busbars.items():
        if key not in new.busbar_of_element:
            raise TopologyError(f"unknown element '{key}'")
        if busbar not in (1, 2):
            raise TopologyError(f"busbar for '{key}' must be 1 or 2 (got {busbar})")
        new.busbar_of_element[key] = busbar
    for line_id, status in action.set_line_status.items():
        if line_id not in new.line_status:
            raise TopologyError(f"unknown line '{line_id}'")
        if status not in (CONNECTED, DISCONNECTED):
            raise TopologyError(f"bad status '{status}' for line '{line_id}'")
        new.line_status[line_id] = status
    return new


@dataclass
class NodeGraph:
    """Electrical nodes: one node per (substation, busbar) pair that holds
    at least one element. Edge set = connected lines between node pairs.
    """

    nodes: list[tuple[int, int]]                 # (sub_id, busbar), fixed order
    node_index: dict[tuple[int, int], int]
    edges: list[tuple[str, int, int]]            # (line_id, from_node, to_node)
    node_of_element: dict[str, int]

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)


def electrical_nodes(case: GridCase, topology: Topology,
                     forced_out: frozenset[str] | set[str] = frozenset()) -> NodeGraph:
    """Build the electrical-node graph for a topology.

    `forced_out` marks lines held out by attack or maintenance regardless of
    the agent-intent status. Node numbering is deterministic: ascending
    substation id, busbar 1 before busbar 2; busbars without elements
    produce no node.
    """
    occupied: dict[tuple[int, int], list[str]] = {}
    for sub in case.substations:
        for key in case.elements_of_sub(sub.id):
            busbar = topology.busbar_of_element[key]
            occupied.setdefault((sub.id, busbar), []).append(key)

    nodes = sorted(occupied.keys())
    node_index = {node: i for i, node in enumerate(nodes)}
    node_of_element = {}
    for node, keys in occupied.items():
        for key in keys:
            node_of_element[key] = node_index[node]

    edges = []
    for line in case.lines:
        if topology.line_status[line.id] != CONNECTED or line.id in forced_out:
            continue
        a = node_of_element[line_end_key(line.id, line.from_sub)]
        b = node_of_element[line_end_key(line.id, line.to_sub)]
        edges.append((line.id, a, b))
    return NodeGraph(nodes=nodes, node_index=node_index, edges=edges,
                     node_of_element=node_of_element)


@dataclass
class Component:
    node_ids: list[int]
    is_main: bool  # contains the slack generator


def connected_components(graph: NodeGraph, slack_node: int | None = None) -> list[Component]:
    """Partition of the graph's nodes; the slack's component is flagged main."""
    adjacency: dict[int, list[int]] = {i: [] for i in range(graph.n_nodes)}
    for _, a, b in graph.edges:
        adjacency[a].append(b)
        adjacency[b].append(a)

    seen: set[int] = set()
    components: list[Component] = []
    for start in range(graph.n_nodes):
        if start in seen:
            continue
        stack = [start]
        members = []
        while stack:
            node = stack.pop()
            if node in seen:
                continue
            seen.add(node)
            members.append(node)
            stack.extend(adjacency[node])
        members.sort()
        components.append(Component(node_ids=members,
                                    is_main=slack_node in members))
    return components


def components_for_case(case: GridCase, graph: NodeGraph) -> list[Component]:
    slack_node = graph.node_of_element[gen_key(case.slack_gen.id)]
    return connected_components(graph, slack_node=slack_node)
