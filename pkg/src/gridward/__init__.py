"""gridward: deterministic power-network operation simulator with
attention-budget alarms, adversarial line attacks, baseline agents and a
scoring harness."""

from importlib import resources
from pathlib import Path

__version__ = "0.1.0"


def data_path(name: str) -> Path:
    """Absolute path of a bundled data file (case, coords, scenario)."""
    return Path(resources.files("gridward").joinpath("data", name))  # type: ignore[arg-type]


from .grid_model import (  # noqa: E402
    CONNECTED,
    DISCONNECTED,
    CaseError,
    GridCase,
    Topology,
    TopologyAction,
    apply_topology,
    connected_components,
    electrical_nodes,
    load_case,
)
from .power_flow import (  # noqa: E402
    CascadeResult,
    FlowSolution,
    Injections,
    OverloadTimers,
    losses_proxy,
    run_cascade,
    simulate_n1,
    solve_dc,
)
