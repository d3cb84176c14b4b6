import json

import pytest

from gridward import data_path
from gridward.grid_model import (
    CONNECTED,
    DISCONNECTED,
    CaseError,
    TopologyAction,
    TopologyError,
    apply_topology,
    components_for_case,
    connected_components,
    electrical_nodes,
    line_end_key,
    load_case,
)


@pytest.fixture(scope="module")
def toy5():
    return load_case(data_path("toy5.json"))


@pytest.fixture(scope="module")
def case14():
    return load_case(data_path("case14.json"))


class TestLoadCase:
    def test_toy5_counts(self, toy5):
        assert len(toy5.substations) == 5
        assert len(toy5.lines) == 6
        assert len(toy5.zones) == 3
        assert toy5.step_minutes == 5

    def test_case14_counts(self, case14):
        assert len(case14.substations) == 14
        assert len(case14.lines) == 20
        assert case14.slack_gen.id == "G1"

    def test_unknown_substation_reference(self, tmp_path, toy5):
        raw = json.loads(data_path("toy5.json").read_text())
        raw["lines"][0]["to_sub"] = 99
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps(raw))
        with pytest.raises(CaseError, match="L1"):
            load_case(bad)

    def test_unknown_key_rejected(self, tmp_path):
        raw = json.loads(data_path("toy5.json").read_text())
        raw["surprise"] = 1
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps(raw))
        with pytest.raises(CaseError, match="unknown key"):
            load_case(bad)

    def test_parse_error_reports_location(self, tmp_path):
        bad = tmp_path / "broken.json"
        bad.write_text('{"name": "x",\n  "oops"\n}')
        with pytest.raises(CaseError, match="line"):
            load_case(bad)

    def test_validation_collects_all_violations(self, tmp_path):
        raw = json.loads(data_path("toy5.json").read_text())
        raw["lines"][0]["reactance"] = -1.0
        raw["lines"][1]["thermal_limit"] = 0.0
        raw["attackable_lines"] = []
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps(raw))
        with pytest.raises(CaseError) as err:
            load_case(bad)
        assert len(err.value.violations) >= 3

    def test_reference_topology_all_busbar_one(self, toy5):
        ref = toy5.reference_topology
        assert set(ref.busbar_of_element.values()) == {1}
        assert all(s == CONNECTED for s in ref.line_status.values())

    def test_zone_lookups(self, toy5):
        assert toy5.zone_of_sub(1) == 0
        assert toy5.zone_of_sub(5) == 2
        # L5 spans sub3 (zone 1) and sub5 (zone 2)
        assert toy5.zones_of_line("L5") == {1, 2}


class TestApplyTopology:
    def test_identity(self, toy5):
        topo = toy5.reference_topology
        out = apply_topology(topo, TopologyAction())
        assert out.busbar_of_element == topo.busbar_of_element
        assert out.line_status == topo.line_status

    def test_point_busbar_move(self, toy5):
        topo = toy5.reference_topology
        key = line_end_key("L3", 2)
        out = apply_topology(topo, TopologyAction(set_busbars={key: 2}))
        assert out.busbar_of_element[key] == 2
        unchanged = {k: v for k, v in out.busbar_of_element.items() if k != key}
        assert unchanged == {k: v for k, v in topo.busbar_of_element.items() if k != key}
        assert out.line_status == topo.line_status
        # input untouched
        assert topo.busbar_of_element[key] == 1

    def test_disconnect_line(self, toy5):
        topo = toy5.reference_topology
        out = apply_topology(topo, TopologyAction(set_line_status={"L1": DISCONNECTED}))
        assert out.line_status["L1"] == DISCONNECTED
        assert out.busbar_of_element == topo.busbar_of_element
        assert topo.line_status["L1"] == CONNECTED

    def test_unknown_element(self, toy5):
        with pytest.raises(TopologyError):
            apply_topology(toy5.reference_topology, TopologyAction(set_busbars={"gen:nope": 2}))
        with pytest.raises(TopologyError):
            apply_topology(toy5.reference_topology, TopologyAction(set_line_status={"L99": DISCONNECTED}))

    def test_idempotent_for_identical_action(self, toy5):
        action = TopologyAction(set_busbars={line_end_key("L4", 2): 2},
                                set_line_status={"L6": DISCONNECTED})
        once = apply_topology(toy5.reference_topology, action)
        twice = apply_topology(once, action)
        assert once.busbar_of_element == twice.busbar_of_element
        assert once.line_status == twice.line_status


class TestElectricalNodes:
    def test_reference_one_node_per_substation(self, toy5):
        graph = electrical_nodes(toy5, toy5.reference_topology)
        assert graph.n_nodes == 5
        assert len(graph.edges) == 6
        assert graph.nodes == [(1, 1), (2, 1), (3, 1), (4, 1), (5, 1)]

    def test_split_substation_adds_node(self, toy5):
        # sub 2 holds ends of L1, L3, L4 plus G2; move L4's end to busbar 2
        topo = apply_topology(toy5.reference_topology,
                              TopologyAction(set_busbars={line_end_key("L4", 2): 2}))
        graph = electrical_nodes(toy5, topo)
        assert graph.n_nodes == 6
        assert (2, 2) in graph.node_index

    def test_empty_busbar_produces_no_node(self, toy5):
        # moving every sub-2 element to busbar 2 keeps a single node for sub 2
        keys = toy5.elements_of_sub(2)
        topo = apply_topology(toy5.reference_topology,
                              TopologyAction(set_busbars={k: 2 for k in keys}))
        graph = electrical_nodes(toy5, topo)
        assert graph.n_nodes == 5
        assert (2, 2) in graph.node_index and (2, 1) not in graph.node_index

    def test_all_lines_disconnected(self, toy5):
        topo = apply_topology(
            toy5.reference_topology,
            TopologyAction(set_line_status={l.id: DISCONNECTED for l in toy5.lines}))
        graph = electrical_nodes(toy5, topo)
        assert graph.n_nodes == 5
        assert graph.edges == []

    def test_forced_out_lines_drop_edges(self, toy5):
        graph = electrical_nodes(toy5, toy5.reference_topology, forced_out={"L5", "L6"})
        assert len(graph.edges) == 4


class TestConnectedComponents:
    def test_fully_connected(self, toy5):
        graph = electrical_nodes(toy5, toy5.reference_topology)
        comps = components_for_case(toy5, graph)
        assert len(comps) == 1
        assert comps[0].is_main

    def test_isolating_sub5(self, toy5):
        topo = apply_topology(
            toy5.reference_topology,
            TopologyAction(set_line_status={"L5": DISCONNECTED, "L6": DISCONNECTED}))
        graph = electrical_nodes(toy5, topo)
        comps = components_for_case(toy5, graph)
        assert len(comps) == 2
        main = next(c for c in comps if c.is_main)
        other = next(c for c in comps if not c.is_main)
        assert len(main.node_ids) == 4
        assert other.node_ids == [graph.node_index[(5, 1)]]

    def test_empty_edges_gives_singletons(self, toy5):
        topo = apply_topology(
            toy5.reference_topology,
            TopologyAction(set_line_status={l.id: DISCONNECTED for l in toy5.lines}))
        graph = electrical_nodes(toy5, topo)
        comps = connected_components(graph)
        assert len(comps) == graph.n_nodes

    def test_partition_property(self, toy5, case14):
        import random
        rng = random.Random(7)
        for case in (toy5, case14):
            for _ in range(20):
                open_lines = {l.id: (DISCONNECTED if rng.random() < 0.3 else CONNECTED)
                              for l in case.lines}
                moved = {k: rng.choice([1, 2]) for k in case.all_element_keys()
                         if rng.random() < 0.3}
                topo = apply_topology(case.reference_topology,
                                      TopologyAction(set_busbars=moved,
                                                     set_line_status=open_lines))
                graph = electrical_nodes(case, topo)
                comps = connected_components(graph)
                seen = [n for c in comps for n in c.node_ids]
                assert sorted(seen) == list(range(graph.n_nodes))
