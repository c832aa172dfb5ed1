import pytest
from fastapi.testclient import TestClient

from crewsim import tbs
from crewsim.orchestrator import SessionConfig
from crewsim.server import create_app
from crewsim.world import LocationRef


@pytest.fixture
def app(demo_paths):
    config = SessionConfig(
        map_path=demo_paths["map"],
        corpus_path=demo_paths["corpus"],
        scenario_path=demo_paths["scenario"],
    )
    return create_app(config)


def read_until(ws, predicate, limit=300):
    for _ in range(limit):
        frame = ws.receive_json()
        if predicate(frame):
            return frame
    raise AssertionError("expected frame never arrived")


def chat_with_text(text):
    return lambda f: f["type"] == "chat" and text in f["payload"]["text"]


def test_hello_then_state_stream(app):
    with TestClient(app) as client:
        with client.websocket_connect("/ws") as ws:
            hello = ws.receive_json()
            assert hello["type"] == "control"
            assert hello["payload"]["event"] == "hello"
            assert {w["name"] for w in hello["payload"]["map"]["waypoints"]} >= {"gate"}
            state = read_until(ws, lambda f: f["type"] == "state")
            robots = {r["id"] for r in state["payload"]["robots"]}
            assert robots == {"husky", "snapdragon"}


def test_wake_ack_streams_back(app):
    with TestClient(app) as client:
        with client.websocket_connect("/ws") as ws:
            ws.receive_json()
            ws.send_json({"type": "say", "text": "Snapdragon"})
            frame = read_until(ws, chat_with_text("Snapdragon standing by"))
            assert frame["payload"]["speaker"] == "dm"


def test_two_consoles_see_identical_turns(app):
    with TestClient(app) as client:
        with client.websocket_connect("/ws") as ws1, client.websocket_connect("/ws") as ws2:
            ws1.receive_json()
            ws2.receive_json()
            ws1.send_json({"type": "say", "text": "Husky"})
            f1 = read_until(ws1, chat_with_text("standing by"))
            f2 = read_until(ws2, chat_with_text("standing by"))
            assert f1["payload"] == f2["payload"]


def test_malformed_message_errors_only_that_client(app):
    with TestClient(app) as client:
        with client.websocket_connect("/ws") as ws1, client.websocket_connect("/ws") as ws2:
            ws1.receive_json()
            ws2.receive_json()
            ws1.send_json({"type": "blargh"})
            err = read_until(ws1, lambda f: f["type"] == "error")
            assert "unknown frame type" in err["payload"]["message"]
            ws2.send_json({"type": "say", "text": "Husky"})
            frames = []
            frame = read_until(ws2, chat_with_text("standing by"))
            frames.append(frame)
            assert all(f["type"] != "error" for f in frames)


def test_wizard_claim_and_submit(app):
    with TestClient(app) as client:
        with client.websocket_connect("/ws") as wizard, client.websocket_connect("/ws") as operator:
            wizard.receive_json()
            operator.receive_json()
            wizard.send_json({"type": "control", "payload": {"action": "claim_wizard"}})
            read_until(wizard, lambda f: f["type"] == "control"
                       and f["payload"].get("event") == "wizard_granted")
            wizard.send_json(
                {"type": "control", "payload": {"action": "set_dm_mode", "mode": "wizard"}}
            )
            read_until(wizard, lambda f: f["type"] == "control"
                       and f["payload"].get("event") == "dm_mode")

            operator.send_json({"type": "say", "text": "Husky, go to the gate"})
            inbox = read_until(wizard, lambda f: f["type"] == "wizard_inbox")
            assert "go to the gate" in inbox["payload"]["text"]

            msg = tbs.TbsMessage(
                msg_id="wiz-1", robot_id="husky", action="GOTO",
                location=LocationRef("waypoint", "crossroads"),
            )
            wizard.send_json(
                {"type": "wizard", "reply": "Husky is rolling.", "tbs": tbs.encode(msg)}
            )
            frame = read_until(operator, chat_with_text("Husky is rolling."))
            assert frame["payload"]["speaker"] == "wizard"
            state = read_until(
                operator,
                lambda f: f["type"] == "state"
                and next(r for r in f["payload"]["robots"] if r["id"] == "husky")["busy"],
            )
            assert state is not None


def test_second_wizard_claim_rejected(app):
    with TestClient(app) as client:
        with client.websocket_connect("/ws") as w1, client.websocket_connect("/ws") as w2:
            w1.receive_json()
            w2.receive_json()
            w1.send_json({"type": "control", "payload": {"action": "claim_wizard"}})
            read_until(w1, lambda f: f["type"] == "control"
                       and f["payload"].get("event") == "wizard_granted")
            w2.send_json({"type": "control", "payload": {"action": "claim_wizard"}})
            err = read_until(w2, lambda f: f["type"] == "error")
            assert "wizard role" in err["payload"]["message"]


def test_set_wizard_mode_without_wizard_errors(app):
    with TestClient(app) as client:
        with client.websocket_connect("/ws") as ws:
            ws.receive_json()
            ws.send_json(
                {"type": "control", "payload": {"action": "set_dm_mode", "mode": "wizard"}}
            )
            err = read_until(ws, lambda f: f["type"] == "error")
            assert "wizard" in err["payload"]["message"]


def test_reconnect_restores_transcript(app):
    with TestClient(app) as client:
        with client.websocket_connect("/ws") as ws:
            ws.receive_json()
            ws.send_json({"type": "say", "text": "Husky"})
            read_until(ws, chat_with_text("standing by"))
        with client.websocket_connect("/ws") as ws:
            hello = ws.receive_json()
            texts = [t["text"] for t in hello["payload"]["transcript"]]
            assert "Husky" in texts
            assert any("standing by" in t for t in texts)
