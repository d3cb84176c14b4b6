import threading

import pytest
from fastapi.testclient import TestClient

from gridward.runner import replay
from gridward.service import create_app


@pytest.fixture()
def client(tmp_path):
    app = create_app(logs_dir=str(tmp_path / "session-logs"))
    with TestClient(app) as test_client:
        test_client.logs_dir = tmp_path / "session-logs"
        yield test_client


def new_session(client, **overrides):
    body = {"case": "toy5", "scenario": "week_flat", "seed": 3,
            "assistant": "sie+rba2", "mode": "human-drives", "opponent": False}
    body.update(overrides)
    response = client.post("/sessions", json=body)
    assert response.status_code == 200, response.text
    return response.json()


class TestCreateSession:
    def test_valid_request(self, client):
        data = new_session(client)
        assert data["session_id"]
        assert data["observation"]["step"] == 0
        assert data["observation"]["alpha"] == 3.0
        assert data["case"]["name"] == "toy5"
        assert data["case"]["coords"]["substations"]["1"]

    def test_unknown_agent_rejected(self, client):
        response = client.post("/sessions", json={"case": "toy5",
                                                  "scenario": "week_flat",
                                                  "assistant": "skynet"})
        assert response.status_code == 422

    def test_unknown_case_rejected(self, client):
        response = client.post("/sessions", json={"case": "enoent",
                                                  "scenario": "week_flat"})
        assert response.status_code == 422

    def test_sessions_are_independent(self, client):
        a = new_session(client, seed=1)
        b = new_session(client, seed=2)
        assert a["session_id"] != b["session_id"]
        # stepping one session leaves the other untouched
        client.post(f"/sessions/{a['session_id']}/step",
                    json={"source": "human",
                          "action": {"set_line_status": {"L3": "disconnected"}}})
        obs_b = client.get(f"/sessions/{b['session_id']}/observation").json()
        assert obs_b["step"] == 0
        assert obs_b["line_status"]["L3"] == "connected"

    def test_capacity_limit(self, tmp_path):
        app = create_app(session_capacity=1)
        with TestClient(app) as limited:
            first = limited.post("/sessions", json={"case": "toy5",
                                                    "scenario": "week_flat"})
            assert first.status_code == 200
            second = limited.post("/sessions", json={"case": "toy5",
                                                     "scenario": "week_flat"})
            assert second.status_code == 503


class TestStep:
    def test_accept_assistant_on_quiet_step(self, client):
        data = new_session(client)
        sid = data["session_id"]
        before = data["observation"]["busbars"]
        response = client.post(f"/sessions/{sid}/step",
                               json={"source": "accept-assistant"})
        assert response.status_code == 200
        payload = response.json()["event"]["payload"]
        assert payload["observation"]["step"] == 1
        assert payload["observation"]["busbars"] == before
        assert payload["info"]["legal"]

    def test_two_substation_action_flagged_illegal(self, client):
        sid = new_session(client)["session_id"]
        action = {"set_busbars": {"line:L1:1": 2, "line:L1:2": 2}}
        response = client.post(f"/sessions/{sid}/step",
                               json={"source": "human", "action": action})
        info = response.json()["event"]["payload"]["info"]
        assert not info["legal"]
        assert any("max 1 substation" in r for r in info["illegal_reasons"])

    def test_assistant_alarm_spends_budget(self, client):
        # dn+rba2 pre-warns immediately on the N-1-insecure flat grid
        sid = new_session(client, assistant="dn+rba2")["session_id"]
        suggestion = client.get(f"/sessions/{sid}/suggestion").json()
        assert suggestion["alarm"] == [0, 1]
        response = client.post(f"/sessions/{sid}/step",
                               json={"source": "accept-assistant"})
        events = response.json()
        obs = events["event"]["payload"]["observation"]
        assert obs["alpha"] == 2.0

    def test_human_alarm_event_carries_zones(self, client):
        sid = new_session(client)["session_id"]
        client.post(f"/sessions/{sid}/step",
                    json={"source": "human", "alarm": {"zones": [2, 0]}})
        with client.websocket_connect(f"/sessions/{sid}/events") as ws:
            first = ws.receive_json()
            second = ws.receive_json()
            third = ws.receive_json()
        assert [e["type"] for e in (first, second, third)] == ["step", "step", "alarm"]
        assert third["payload"]["zones"] == [0, 2]
        assert third["payload"]["alpha"] == 2.0

    def test_malformed_action_rejected(self, client):
        sid = new_session(client)["session_id"]
        response = client.post(f"/sessions/{sid}/step",
                               json={"source": "human",
                                     "action": {"warp_core": True}})
        assert response.status_code == 400

    def test_human_step_rejected_in_assistant_mode(self, client):
        sid = new_session(client, mode="assistant-drives")["session_id"]
        response = client.post(f"/sessions/{sid}/step",
                               json={"source": "human", "action": {}})
        assert response.status_code == 400

    def test_idempotency_key_replays_response(self, client):
        sid = new_session(client)["session_id"]
        body = {"source": "human", "action": {}, "idempotency_key": "k1"}
        first = client.post(f"/sessions/{sid}/step", json=body).json()
        second = client.post(f"/sessions/{sid}/step", json=body).json()
        assert first == second
        obs = client.get(f"/sessions/{sid}/observation").json()
        assert obs["step"] == 1  # stepped once, not twice

    def test_game_over_closes_session(self, client):
        sid = new_session(client)["session_id"]
        client.post(f"/sessions/{sid}/step",
                    json={"source": "human",
                          "action": {"set_line_status": {"L6": "disconnected"}}})
        response = client.post(f"/sessions/{sid}/step",
                               json={"source": "human",
                                     "action": {"set_line_status": {"L5": "disconnected"}}})
        info = response.json()["event"]["payload"]["info"]
        assert info["done"]
        after = client.post(f"/sessions/{sid}/step",
                            json={"source": "human", "action": {}})
        assert after.status_code == 409

    def test_session_log_persisted_and_replayable(self, client):
        sid = new_session(client)["session_id"]
        client.post(f"/sessions/{sid}/step",
                    json={"source": "human",
                          "action": {"set_line_status": {"L6": "disconnected"}}})
        client.post(f"/sessions/{sid}/step",
                    json={"source": "human",
                          "action": {"set_line_status": {"L5": "disconnected"}}})
        log_path = client.logs_dir / f"session-{sid}.jsonl"
        assert log_path.exists()
        verdict = replay(log_path)
        assert verdict.ok, verdict

    def test_serialized_steps_no_lost_updates(self, client):
        sid = new_session(client)["session_id"]
        errors = []

        def worker():
            try:
                response = client.post(f"/sessions/{sid}/step",
                                       json={"source": "human", "action": {}})
                assert response.status_code == 200
            except Exception as exc:  # pragma: no cover
                errors.append(exc)

        threads = [threading.Thread(target=worker) for _ in range(8)]
        for thread in threads:
            thread.start()
        for thread in threads:
            thread.join()
        assert not errors
        obs = client.get(f"/sessions/{sid}/observation").json()
        assert obs["step"] == 8


class TestSuggestion:
    def test_quiet_grid_suggests_do_nothing(self, client):
        # rba1 stays silent on a quiet grid (rba2 would pre-warn: the flat
        # toy grid is N-1 insecure against losing L2)
        sid = new_session(client, assistant="sie+rba1")["session_id"]
        suggestion = client.get(f"/sessions/{sid}/suggestion").json()
        assert suggestion["action"] == {}
        assert suggestion["alarm"] is None
        assert suggestion["current_max_rho"] < 0.95

    def test_overload_suggestion_improves_loading(self, client):
        sid = new_session(client)["session_id"]
        client.post(f"/sessions/{sid}/step",
                    json={"source": "human",
                          "action": {"set_line_status": {"L2": "disconnected"}}})
        suggestion = client.get(f"/sessions/{sid}/suggestion").json()
        assert suggestion["current_max_rho"] > 1.0
        assert suggestion["predicted_max_rho"] < suggestion["current_max_rho"]
        assert suggestion["action"]

    def test_suggestion_is_pure(self, client):
        sid = new_session(client, assistant="dn+rba2")["session_id"]
        first = client.get(f"/sessions/{sid}/suggestion").json()
        second = client.get(f"/sessions/{sid}/suggestion").json()
        third = client.get(f"/sessions/{sid}/suggestion").json()
        assert first == second == third
        obs = client.get(f"/sessions/{sid}/observation").json()
        assert obs["step"] == 0
        assert obs["alpha"] == 3.0


class TestEventStream:
    def test_gapless_sequence_and_resume(self, client):
        sid = new_session(client)["session_id"]
        for _ in range(4):
            client.post(f"/sessions/{sid}/step",
                        json={"source": "human", "action": {}})
        with client.websocket_connect(f"/sessions/{sid}/events") as ws:
            seqs = [ws.receive_json()["seq"] for _ in range(5)]
        assert seqs == [1, 2, 3, 4, 5]
        # resume from the middle
        with client.websocket_connect(f"/sessions/{sid}/events?since=3") as ws:
            resumed = [ws.receive_json()["seq"] for _ in range(2)]
        assert resumed == [4, 5]

    def test_gameover_event_ends_stream(self, client):
        sid = new_session(client)["session_id"]
        client.post(f"/sessions/{sid}/step",
                    json={"source": "human",
                          "action": {"set_line_status": {"L6": "disconnected"}}})
        client.post(f"/sessions/{sid}/step",
                    json={"source": "human",
                          "action": {"set_line_status": {"L5": "disconnected"}}})
        with client.websocket_connect(f"/sessions/{sid}/events") as ws:
            received = []
            while True:
                event = ws.receive_json()
                received.append(event["type"])
                if event["type"] == "gameover":
                    payload = event["payload"]
                    break
        assert payload["outcome"] == "failed"
        assert payload["cause"] == "islanded load"
        assert payload["failure_zone"] == 2
        assert received[-1] == "gameover"

    def test_unknown_session_error_event(self, client):
        with client.websocket_connect("/sessions/nope/events") as ws:
            event = ws.receive_json()
        assert event["type"] == "error"


class TestDelete:
    def test_generated_scenario_session_is_replayable(self, client):
        ref = {"kind": "generated",
               "config": {"seed": 777, "n_steps": 400,
                          "peak_load": {"D1": 62.0, "D2": 50.0, "D3": 32.0}}}
        data = new_session(client, scenario=ref, assistant="sie+rba1",
                           opponent=True, seed=5)
        sid = data["session_id"]
        for _ in range(6):
            client.post(f"/sessions/{sid}/step",
                        json={"source": "accept-assistant"})
        client.delete(f"/sessions/{sid}")
        verdict = replay(client.logs_dir / f"session-{sid}.jsonl")
        assert verdict.ok, verdict

    def test_delete_persists_and_removes(self, client):
        sid = new_session(client)["session_id"]
        client.post(f"/sessions/{sid}/step", json={"source": "human", "action": {}})
        response = client.delete(f"/sessions/{sid}")
        assert response.status_code == 200
        assert (client.logs_dir / f"session-{sid}.jsonl").exists()
        assert client.get(f"/sessions/{sid}/observation").status_code == 404
