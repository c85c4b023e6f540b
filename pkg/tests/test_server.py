import json

import pytest

from iasm.model import canonical_json
from iasm.server import SessionManager, build_app
from conftest import BROKER_STATE_JSON

COMPACT_BROKER = """\
static client0/0
static client1/0
dynamic sold/0 relational
dynamic buyer/0
dynamic cancelled/0 relational
label q0, q1, t
external q0/0 = [q0]
external q1/0 = [q1]
external t/0 = [t]
rule
if knot (q0() preceq t()) kand knot (q1() preceq t()) then
  cancelled() := true
else
  if q0() preceq q1() then
    par { sold() := true; buyer() := client0 }
  else
    par { sold() := true; buyer() := client1 }
  endif
endif
"""

COMPACT_STATE = {
    "elements": ["c0", "c1", "yes"],
    "functions": {
        "client0/0": {"default": "c0", "table": []},
        "client1/0": {"default": "c1", "table": []},
    },
    "dynamic": ["buyer/0", "cancelled/0", "sold/0"],
    "relational": ["cancelled/0", "sold/0"],
}

LOAD = {"type": "loadProgram", "asmText": COMPACT_BROKER, "stateJson": COMPACT_STATE}


def fresh():
    mgr = SessionManager()
    session, msgs = mgr.load(LOAD)
    return mgr, session, msgs


def reply(query_tokens, elem):
    return {"query": query_tokens, "reply": f"e:{elem}"}


class TestProtocol:
    def test_load_announces_pending(self):
        _mgr, _session, msgs = fresh()
        assert [m["type"] for m in msgs] == ["hello", "pending"]
        assert msgs[1]["queries"] == [["l:q0"], ["l:q1"], ["l:t"]]
        assert msgs[1]["stepIndex"] == 0

    def test_single_reply_completes_step(self):
        mgr, session, _ = fresh()
        out = mgr.handle(session, {"type": "submitRound", "replies": [reply(["l:q0"], "yes")]})
        assert [m["type"] for m in out] == ["roundAccepted", "stepDone", "pending"]
        done = out[1]
        assert done["verdict"] == "success"
        assert done["updates"] == [["buyer", [], "c0"], ["sold", [], "true"]]
        assert done["nextState"]["functions"]["buyer/0"]["table"] == [[[], "c0"]]

    def test_simultaneous_tie_prefers_client0(self):
        mgr, session, _ = fresh()
        out = mgr.handle(
            session,
            {
                "type": "submitRound",
                "replies": [reply(["l:q0"], "yes"), reply(["l:q1"], "yes")],
            },
        )
        done = [m for m in out if m["type"] == "stepDone"][0]
        assert done["updates"] == [["buyer", [], "c0"], ["sold", [], "true"]]

    def test_timeout_only_cancels(self):
        mgr, session, _ = fresh()
        out = mgr.handle(session, {"type": "submitRound", "replies": [reply(["l:t"], "yes")]})
        done = [m for m in out if m["type"] == "stepDone"][0]
        assert done["updates"] == [["cancelled", [], "true"]]

    def test_round_accepted_mirrors_history(self):
        mgr, session, _ = fresh()
        out = mgr.handle(session, {"type": "submitRound", "replies": [reply(["l:q1"], "yes")]})
        accepted = out[0]
        assert accepted["history"]["rounds"] == [[{"query": ["l:q1"], "reply": "e:yes"}]]

    def test_not_pending_rejected(self):
        mgr, session, _ = fresh()
        out = mgr.handle(
            session, {"type": "submitRound", "replies": [reply(["l:ghost"], "yes")]}
        )
        assert out == [
            {"type": "error", "code": "NotPending", "msg": "query l:ghost is not pending"}
        ]

    def test_empty_round_rejected(self):
        mgr, session, _ = fresh()
        out = mgr.handle(session, {"type": "submitRound", "replies": []})
        assert out[0]["code"] == "EmptyRound"

    def test_no_program_error(self):
        mgr = SessionManager()
        out = mgr.handle(None, {"type": "submitRound", "replies": []})
        assert out[0]["code"] == "NoProgram"

    def test_bad_program_reported(self):
        mgr = SessionManager()
        session, msgs = mgr.load({"type": "loadProgram", "asmText": "rule true() := false()"})
        assert session is None
        assert msgs[0]["code"] == "InvalidProgram"

    def test_reset_restores_initial_state(self):
        mgr, session, _ = fresh()
        mgr.handle(session, {"type": "submitRound", "replies": [reply(["l:q0"], "yes")]})
        out = mgr.handle(session, {"type": "reset"})
        assert [m["type"] for m in out] == ["hello", "pending"]
        assert session.step_index == 0
        assert session.state == session.initial

    def test_auto_step_deterministic(self):
        out1 = fresh()[0].handle(fresh()[1], {"type": "autoStep", "seed": 3})
        mgr, session, _ = fresh()
        out2 = mgr.handle(session, {"type": "autoStep", "seed": 3})
        assert canonical_json(out1) == canonical_json(out2)
        assert out1[-2]["type"] == "stepDone"

    def test_replay_reproduces_server_messages(self):
        script = [
            {"type": "submitRound", "replies": [reply(["l:q1"], "yes")]},
            {"type": "reset"},
            {"type": "submitRound", "replies": [reply(["l:t"], "yes")]},
        ]

        def play():
            mgr, session, msgs = fresh()
            log = [msgs]
            for m in script:
                log.append(mgr.handle(session, m))
            return canonical_json(log)

        assert play() == play()

    def test_multi_step_session(self):
        mgr, session, _ = fresh()
        out = mgr.handle(session, {"type": "submitRound", "replies": [reply(["l:q0"], "yes")]})
        assert out[-1]["type"] == "pending"
        assert out[-1]["stepIndex"] == 1
        # the next step runs in the updated state and pends the same queries
        out2 = mgr.handle(session, {"type": "submitRound", "replies": [reply(["l:t"], "yes")]})
        done = [m for m in out2 if m["type"] == "stepDone"][0]
        assert done["updates"] == [["cancelled", [], "true"]]


class TestHttpApi:
    @pytest.fixture()
    def client(self):
        from fastapi.testclient import TestClient

        return TestClient(build_app())

    def test_session_lifecycle(self, client):
        created = client.post(
            "/session", json={"asmText": COMPACT_BROKER, "stateJson": COMPACT_STATE}
        )
        assert created.status_code == 200
        sid = created.json()["sessionId"]
        kinds = [m["type"] for m in created.json()["messages"]]
        assert kinds == ["hello", "pending"]

        view = client.get(f"/session/{sid}").json()
        assert view["pending"] == [["l:q0"], ["l:q1"], ["l:t"]]
        assert view["stepIndex"] == 0

        out = client.post(
            f"/session/{sid}/round",
            json={"replies": [reply(["l:q0"], "yes"), reply(["l:q1"], "yes")]},
        ).json()["messages"]
        done = [m for m in out if m["type"] == "stepDone"][0]
        assert done["updates"] == [["buyer", [], "c0"], ["sold", [], "true"]]

        reset = client.post(f"/session/{sid}/reset").json()["messages"]
        assert [m["type"] for m in reset] == ["hello", "pending"]

        auto = client.post(f"/session/{sid}/autostep", json={"seed": 1}).json()["messages"]
        assert auto[-2]["type"] == "stepDone"

    def test_bad_program_is_400(self, client):
        res = client.post("/session", json={"asmText": "rule ???"})
        assert res.status_code == 400

    def test_preloaded_default_session(self):
        from fastapi.testclient import TestClient
        from iasm.model import Structure
        from iasm.syntax import parse_program

        prog = parse_program(COMPACT_BROKER)
        state = Structure.from_json(COMPACT_STATE, prog.vocabulary)
        app = build_app(preload=(COMPACT_BROKER, state))
        client = TestClient(app)
        view = client.get("/session/default").json()
        assert view["pending"] == [["l:q0"], ["l:q1"], ["l:t"]]

    def test_unknown_session_404(self, client):
        assert client.get("/session/missing").status_code == 404

    def test_websocket_flow(self, client):
        with client.websocket_connect("/ws") as ws:
            ws.send_json(LOAD)
            hello = json.loads(ws.receive_text())
            assert hello["type"] == "hello"
            pending = json.loads(ws.receive_text())
            assert pending["type"] == "pending"
            ws.send_json(
                {"type": "submitRound", "replies": [reply(["l:t"], "yes")]}
            )
            accepted = json.loads(ws.receive_text())
            assert accepted["type"] == "roundAccepted"
            done = json.loads(ws.receive_text())
            assert done["type"] == "stepDone"
            assert done["updates"] == [["cancelled", [], "true"]]
            json.loads(ws.receive_text())  # pending of the next step
