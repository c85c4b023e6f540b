"""Live session protocol: an external client plays the environment.

A session holds one loaded program and drives one step at a time.  The client
sees the pending queries, submits rounds of replies (all replies in one
``submitRound`` land in the same simultaneity round), and observes finality,
verdicts, update sets, and the successor state.  ``autoStep`` finishes the
current step with a seeded random environment.

Message types

* client -> server: ``loadProgram{asmText, stateJson, replyUniverse?}``,
  ``submitRound{replies: [{query, reply}]}``, ``reset{}``, ``autoStep{seed}``.
* server -> client: ``hello{program, state}``, ``pending{queries, stepIndex}``,
  ``roundAccepted{history}``, ``stepDone{verdict, updates, nextState}``,
  ``error{code, msg}``.

The same handler is exposed over stateful HTTP endpoints (POST /session,
POST /session/{id}/round, GET /session/{id}, POST /session/{id}/reset,
POST /session/{id}/autostep) and over a websocket (``/ws``) carrying the raw
message JSON.  Message handling is deterministic, so a logged client sequence
replayed against a fresh session reproduces the server messages exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.responses import JSONResponse

from .engine import RandomEnvironment, StepView
from .model import AsmError, History, Query, Structure, canonical_json
from .semantics import Evaluator, Verdict
from .syntax import ParseError, Program, desugar_program, parse_program, validate


@dataclass
class Session:
    program_text: str
    program: Program  # core form
    initial: Structure
    state: Structure
    history: History = field(default_factory=History)
    step_index: int = 0
    issued: frozenset[Query] = frozenset()
    halted: bool = False  # a failing step ends the session until reset
    reply_universe: Optional[dict] = None

    def pending(self) -> list[Query]:
        return sorted(q for q in self.issued if not self.history.answered(q))


def _outcome(session: Session):
    ev = Evaluator(session.state, session.history, session.program.external)
    return ev.rule(session.program.rule)


def _pending_msg(session: Session) -> dict:
    return {
        "type": "pending",
        "queries": [q.encode() for q in session.pending()],
        "stepIndex": session.step_index,
    }


def _status(session: Session) -> list[dict]:
    """Evaluate the current step; report stepDone and advance, or pending."""
    out = _outcome(session)
    session.issued = session.issued | out.caused
    if not out.final:
        return [_pending_msg(session)]
    done = {
        "type": "stepDone",
        "verdict": out.verdict.value,
        "updates": out.updates.to_json(),
        "nextState": None,
    }
    if out.verdict is Verdict.SUCCESS:
        next_state = session.state.with_updates(out.updates)
        done["nextState"] = next_state.to_json()
        session.state = next_state
        session.step_index += 1
        session.history = History()
        session.issued = frozenset()
        # Prepare the next step lazily: publish its pending set but never run
        # it to completion here, so reply-free programs cannot loop the server.
        follow = _outcome(session)
        session.issued = follow.caused
        return [done, _pending_msg(session)]
    session.halted = True
    return [done]


def _error(code: str, msg: str) -> dict:
    return {"type": "error", "code": code, "msg": msg}


class SessionManager:
    """Holds sessions and processes protocol messages strictly in order."""

    def __init__(self):
        self.sessions: dict[str, Session] = {}
        self._counter = 0

    def new_id(self) -> str:
        self._counter += 1
        return f"s{self._counter}"

    def load(self, msg: dict) -> tuple[Optional[Session], list[dict]]:
        text = msg.get("asmText", "")
        try:
            program = parse_program(text)
        except ParseError as exc:
            return None, [_error("ParseError", str(exc))]
        diags = validate(program)
        if diags:
            return None, [_error("InvalidProgram", diags[0].message)]
        core = desugar_program(program)
        try:
            state = Structure.from_json(msg.get("stateJson") or {}, core.vocabulary)
        except AsmError as exc:
            return None, [_error("InvalidState", str(exc))]
        session = Session(
            program_text=text,
            program=core,
            initial=state,
            state=state,
            reply_universe=msg.get("replyUniverse"),
        )
        hello = {
            "type": "hello",
            "program": text,
            "state": state.to_json(),
        }
        return session, [hello] + _status(session)

    def handle(self, session: Optional[Session], msg: dict) -> list[dict]:
        mtype = msg.get("type")
        if mtype == "loadProgram":
            raise AsmError("loadProgram creates a session; use load()")
        if session is None:
            return [_error("NoProgram", "no program loaded")]
        if mtype == "submitRound":
            return self._submit_round(session, msg)
        if mtype == "reset":
            return self._reset(session)
        if mtype == "autoStep":
            return self._auto_step(session, int(msg.get("seed", 0)))
        return [_error("UnknownMessage", f"unknown message type {mtype!r}")]

    def _submit_round(self, session: Session, msg: dict) -> list[dict]:
        if session.halted:
            return [_error("Halted", "step failed; reset to continue")]
        replies = msg.get("replies", [])
        if not replies:
            return [_error("EmptyRound", "a round must contain at least one reply")]
        pend = set(session.pending())
        rnd: list[tuple[Query, str]] = []
        seen: set[Query] = set()
        for entry in replies:
            try:
                q = Query.decode(entry["query"])
            except (AsmError, KeyError) as exc:
                return [_error("BadQuery", str(exc))]
            reply = entry.get("reply", "")
            if not reply.startswith("e:"):
                return [_error("BadReply", "replies are element tokens 'e:<elem>'")]
            reply = reply[2:]
            if q not in pend:
                return [_error("NotPending", f"query {q.pretty()} is not pending")]
            if q in seen:
                return [_error("DuplicateQuery", f"two replies for {q.pretty()}")]
            if reply not in session.state.elements:
                return [_error("BadReply", f"{reply!r} is not a state element")]
            seen.add(q)
            rnd.append((q, reply))
        session.history = session.history.extend(rnd)
        accepted = {"type": "roundAccepted", "history": session.history.to_json()}
        return [accepted] + _status(session)

    def _reset(self, session: Session) -> list[dict]:
        session.state = session.initial
        session.history = History()
        session.issued = frozenset()
        session.step_index = 0
        session.halted = False
        hello = {
            "type": "hello",
            "program": session.program_text,
            "state": session.state.to_json(),
        }
        return [hello] + _status(session)

    def _auto_step(self, session: Session, seed: int) -> list[dict]:
        if session.halted:
            return [_error("Halted", "step failed; reset to continue")]
        env = RandomEnvironment(seed, session.reply_universe)
        out: list[dict] = []
        for _ in range(10_000):
            outcome = _outcome(session)
            session.issued = session.issued | outcome.caused
            if outcome.final:
                break
            pend = frozenset(session.pending())
            rnd = env.next_round(
                pend, StepView(session.state, session.history, session.step_index)
            )
            if rnd is None:
                out.append(_error("Stalled", "random environment has no replies to give"))
                return out
            session.history = session.history.extend(rnd)
            out.append({"type": "roundAccepted", "history": session.history.to_json()})
        return out + _status(session)

    def view(self, session: Session) -> dict:
        out = _outcome(session)
        return {
            "program": session.program_text,
            "stepIndex": session.step_index,
            "state": session.state.to_json(),
            "pending": [q.encode() for q in session.pending()],
            "history": session.history.to_json(),
            "final": out.final,
            "verdict": out.verdict.value,
            "updates": out.updates.to_json(),
            "halted": session.halted,
        }


def build_app(manager: Optional[SessionManager] = None, preload=None):
    """FastAPI app exposing the protocol over HTTP and a websocket."""
    manager = manager or SessionManager()
    app = FastAPI(title="iasm session server")
    app.state.manager = manager

    if preload is not None:
        text, state = preload
        session, msgs = manager.load(
            {"type": "loadProgram", "asmText": text, "stateJson": state.to_json()}
        )
        if session is not None:
            manager.sessions["default"] = session

    def _not_found():
        return JSONResponse(
            {"messages": [_error("NoSession", "unknown session id")]}, status_code=404
        )

    @app.post("/session")
    def create_session(body: dict):
        session, msgs = manager.load({"type": "loadProgram", **body})
        if session is None:
            return JSONResponse({"messages": msgs}, status_code=400)
        sid = manager.new_id()
        manager.sessions[sid] = session
        return {"sessionId": sid, "messages": msgs}

    @app.get("/session/{sid}")
    def get_session(sid: str):
        session = manager.sessions.get(sid)
        if session is None:
            return _not_found()
        return manager.view(session)

    @app.post("/session/{sid}/round")
    def post_round(sid: str, body: dict):
        session = manager.sessions.get(sid)
        if session is None:
            return _not_found()
        return {"messages": manager.handle(session, {"type": "submitRound", **body})}

    @app.post("/session/{sid}/reset")
    def post_reset(sid: str):
        session = manager.sessions.get(sid)
        if session is None:
            return _not_found()
        return {"messages": manager.handle(session, {"type": "reset"})}

    @app.post("/session/{sid}/autostep")
    def post_autostep(sid: str, body: dict | None = None):
        session = manager.sessions.get(sid)
        if session is None:
            return _not_found()
        msg = {"type": "autoStep", **(body or {})}
        return {"messages": manager.handle(session, msg)}

    @app.websocket("/ws")
    async def websocket_session(ws: WebSocket):
        await ws.accept()
        session: Optional[Session] = None
        try:
            while True:
                msg = await ws.receive_json()
                if msg.get("type") == "loadProgram":
                    session, msgs = manager.load(msg)
                else:
                    msgs = manager.handle(session, msg)
                for m in msgs:
                    await ws.send_text(canonical_json(m))
        except WebSocketDisconnect:
            pass

    return app


def serve(port: int = 8000, preload=None) -> None:
    import uvicorn

    uvicorn.run(build_app(preload=preload), host="127.0.0.1", port=port)
