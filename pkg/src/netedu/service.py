"""HTTP API: student sessions, exercise rendering and immediate feedback.

Sessions carry a seed; every rendered instance is derived from
(session seed, exercise id, attempt number), so a session replays
identically from its seed and a new attempt after an answer draws a fresh
randomization. Answer-key material (masked field values, which MCQ answer
is correct) never appears in student-scoped responses; grading happens
server-side against the exact instance the student saw.

State is an append-only JSONL log with periodic snapshots, replayed at
startup; no external database.
"""

from __future__ import annotations

import json
import os
import secrets
import threading
import time
from dataclasses import dataclass, field as dc_field
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from . import dissect, exercises
from .exercises import Bank
from .rng import derive_seed

SNAPSHOT_EVERY = 500


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message


@dataclass
class Attempt:
    attempt: int
    submission: object
    verdict: dict
    timestamp: float


@dataclass
class Session:
    session_id: str
    seed: int
    created_at: float
    attempts: dict[str, int] = dc_field(default_factory=dict)  # next attempt
    rendered: dict[str, int] = dc_field(default_factory=dict)  # attempt shown
    history: dict[str, list[Attempt]] = dc_field(default_factory=dict)
    lock: threading.Lock = dc_field(default_factory=threading.Lock,
                                    repr=False, compare=False)


class SessionStore:
    """Sessions plus the append-only persistence log."""

    def __init__(self, state_file: str | None):
        self.sessions: dict[str, Session] = {}
        self._lock = threading.Lock()
        self._state_file = Path(state_file) if state_file else None
        self._events_since_snapshot = 0
        if self._state_file:
            self._load()

    # -- persistence ------------------------------------------------------

    def _snapshot_path(self) -> Path:
        return self._state_file.with_suffix(self._state_file.suffix + ".snapshot")

    def _load(self):
        snap = self._snapshot_path()
        if snap.exists():
            for raw in json.loads(snap.read_text()):
                self._restore_session(raw)
        if self._state_file.exists():
            with self._state_file.open() as fh:
                for line in fh:
                    line = line.strip()
                    if line:
                        self._apply(json.loads(line))

    def _restore_session(self, raw: dict):
        session = Session(raw["session_id"], raw["seed"], raw["created_at"],
                          attempts=dict(raw["attempts"]),
                          rendered=dict(raw["rendered"]))
        for ex, entries in raw["history"].items():
            session.history[ex] = [Attempt(**e) for e in entries]
        self.sessions[session.session_id] = session

    def _dump_session(self, s: Session) -> dict:
        return {"session_id": s.session_id, "seed": s.seed,
                "created_at": s.created_at, "attempts": s.attempts,
                "rendered": s.rendered,
                "history": {ex: [e.__dict__ for e in entries]
                            for ex, entries in s.history.items()}}

    def _apply(self, event: dict):
        op = event["op"]
        if op == "session":
            self.sessions[event["id"]] = Session(
                event["id"], event["seed"], event["ts"])
        elif op == "render":
            s = self.sessions.get(event["session"])
            if s is not None:
                s.rendered[event["exercise"]] = event["attempt"]
        elif op == "answer":
            s = self.sessions.get(event["session"])
            if s is not None:
                s.history.setdefault(event["exercise"], []).append(Attempt(
                    event["attempt"], event["submission"], event["verdict"],
                    event["ts"]))
                s.attempts[event["exercise"]] = event["attempt"] + 1
                s.rendered.pop(event["exercise"], None)

    def log(self, event: dict):
        if not self._state_file:
            return
        with self._lock:
            with self._state_file.open("a") as fh:
                fh.write(json.dumps(event) + "\n")
            self._events_since_snapshot += 1
            if self._events_since_snapshot >= SNAPSHOT_EVERY:
                self._snapshot_locked()

    def _snapshot_locked(self):
        snap = [self._dump_session(s) for s in self.sessions.values()]
        tmp = self._snapshot_path().with_suffix(".tmp")
        tmp.write_text(json.dumps(snap))
        tmp.replace(self._snapshot_path())
        self._state_file.write_text("")
        self._events_since_snapshot = 0

    # -- session operations ------------------------------------------------

    def create(self, seed: int | None) -> Session:
        with self._lock:
            session_id = secrets.token_hex(16)
            if seed is None:
                seed = secrets.randbits(63)
            session = Session(session_id, seed, time.time())
            self.sessions[session_id] = session
        self.log({"op": "session", "id": session_id, "seed": seed,
                  "ts": session.created_at})
        return session

    def get(self, session_id: str) -> Session:
        session = self.sessions.get(session_id)
        if session is None:
            raise ApiError(404, "session_not_found",
                           f"unknown session {session_id}")
        return session


def _require_session(store: SessionStore, request: Request) -> Session:
    session_id = request.query_params.get("session")
    if not session_id:
        raise ApiError(400, "session_required",
                       "this exercise type needs ?session=...")
    return store.get(session_id)


def _instance_seed(session: Session, exercise_id: str, attempt: int) -> int:
    return derive_seed(session.seed, exercise_id, attempt)


def _render_exercise(bank: Bank, q, session: Session | None) -> dict:
    qtype = Bank.qtype(q)
    attempt = session.attempts.get(q.id, 0) if session else 0
    body: dict = {"id": q.id, "type": qtype, "prompt": q.prompt,
                  "attempt": attempt}
    if qtype == "mcq":
        inst = exercises.instantiate_mcq(
            q, _instance_seed(session, q.id, attempt))
        body["answers"] = inst.texts
    elif qtype == "short":
        pass  # the prompt is the whole exercise
    elif qtype == "trace_mask":
        tree = exercises.render_trace_mask(q)
        pkt = q.capture.packets[q.packet_index].data
        body["masked_paths"] = list(q.masked_paths)
        body["fields"] = _field_listing(tree)
        body["hex"] = dissect.hex_dump(
            pkt, dissect.masked_byte_offsets(tree))
        body["packet_index"] = q.packet_index
    else:  # trace_reorder
        inst = exercises.instantiate_reorder(
            q, _instance_seed(session, q.id, attempt))
        body["items"] = inst.summaries()
    if session is not None:
        session.rendered[q.id] = attempt
    return body


def _field_listing(tree: dissect.PacketTree) -> list[dict]:
    out = []
    for layer, f in tree.iter_fields():
        out.append({
            "path": dissect.field_path(layer, f),
            "display": "????" if f.masked else f.display,
            "masked": f.masked,
            "byte_offset": f.byte_offset,
            "bit_offset": f.bit_offset,
            "bit_width": f.bit_width,
        })
    return out


def _grade_submission(q, session: Session, attempt: int, answer) -> exercises.Verdict:
    qtype = Bank.qtype(q)
    if qtype == "mcq":
        if not isinstance(answer, int) or isinstance(answer, bool):
            raise ApiError(400, "bad_submission",
                           "mcq answers are the integer display index")
        inst = exercises.instantiate_mcq(
            q, _instance_seed(session, q.id, attempt))
        try:
            return exercises.grade_mcq(inst, answer)
        except exercises.InputError as exc:
            raise ApiError(400, "bad_submission", str(exc)) from None
    if qtype == "short":
        if not isinstance(answer, str):
            raise ApiError(400, "bad_submission",
                           "short answers are submitted as a string")
        return exercises.grade_short(q, answer)
    if qtype == "trace_mask":
        if not isinstance(answer, dict):
            raise ApiError(400, "bad_submission",
                           "trace answers map field paths to values")
        return exercises.grade_trace_mask(
            q, {str(k): str(v) for k, v in answer.items()})
    if not isinstance(answer, list) or not all(
            isinstance(x, int) and not isinstance(x, bool) for x in answer):
        raise ApiError(400, "bad_submission",
                       "reorder answers are a list of display positions")
    inst = exercises.instantiate_reorder(
        q, _instance_seed(session, q.id, attempt))
    try:
        return exercises.grade_reorder(inst, answer)
    except exercises.InputError as exc:
        raise ApiError(400, "bad_submission", str(exc)) from None


def create_app(bank_dir: str, state_file: str | None = None,
               static_dir: str | None = None,
               teacher_secret: str | None = None) -> FastAPI:
    bank = exercises.load_bank(bank_dir)
    store = SessionStore(state_file)
    if teacher_secret is None:
        teacher_secret = os.environ.get("NETEDU_TEACHER_SECRET")
    captures = _collect_captures(bank)

    app = FastAPI(title="netedu", docs_url=None, redoc_url=None)

    @app.exception_handler(ApiError)
    async def _api_error(_request, exc: ApiError):
        return JSONResponse(status_code=exc.status,
                            content={"status": exc.status, "code": exc.code,
                                     "message": exc.message})

    @app.exception_handler(Exception)
    async def _unexpected(_request, exc: Exception):
        return JSONResponse(status_code=500,
                            content={"status": 500, "code": "internal_error",
                                     "message": str(exc)})

    async def _json_body(request: Request) -> dict:
        raw = await request.body()
        if not raw:
            return {}
        try:
            body = json.loads(raw)
        except json.JSONDecodeError:
            raise ApiError(400, "bad_request", "body must be JSON") from None
        if not isinstance(body, dict):
            raise ApiError(400, "bad_request", "body must be a JSON object")
        return body

    @app.post("/api/sessions")
    async def create_session(request: Request):
        body = await _json_body(request)
        seed = body.get("seed")
        if seed is not None and not isinstance(seed, int):
            raise ApiError(400, "bad_request", "seed must be an integer")
        session = store.create(seed)
        return {"session_id": session.session_id, "seed": session.seed}

    @app.get("/api/exercises")
    async def list_exercises():
        return [{"id": qid, "type": Bank.qtype(bank[qid]),
                 "prompt": bank[qid].prompt}
                for qid in bank.ids()]

    @app.get("/api/exercises/{exercise_id}")
    async def get_exercise(exercise_id: str, request: Request):
        if exercise_id not in bank:
            raise ApiError(404, "exercise_not_found",
                           f"unknown exercise {exercise_id}")
        q = bank[exercise_id]
        session_id = request.query_params.get("session")
        if session_id is None and Bank.qtype(q) in ("mcq", "trace_reorder"):
            # randomized types cannot be rendered without a session seed
            raise ApiError(400, "session_required",
                           "this exercise type needs ?session=...")
        if session_id is None:
            return _render_exercise(bank, q, None)
        session = store.get(session_id)
        with session.lock:
            body = _render_exercise(bank, q, session)
            store.log({"op": "render", "session": session.session_id,
                       "exercise": exercise_id, "attempt": body["attempt"],
                       "ts": time.time()})
        return body

    @app.post("/api/exercises/{exercise_id}/answer")
    async def answer_exercise(exercise_id: str, request: Request):
        if exercise_id not in bank:
            raise ApiError(404, "exercise_not_found",
                           f"unknown exercise {exercise_id}")
        session = _require_session(store, request)
        body = await _json_body(request)
        if "answer" not in body:
            raise ApiError(400, "bad_submission", "body needs an `answer`")
        q = bank[exercise_id]
        with session.lock:
            if exercise_id not in session.rendered:
                raise ApiError(409, "instance_not_rendered",
                               "fetch the exercise before answering it")
            attempt = session.rendered[exercise_id]
            verdict = _grade_submission(q, session, attempt, body["answer"])
            record = Attempt(attempt, body["answer"], verdict.to_dict(),
                             time.time())
            session.history.setdefault(exercise_id, []).append(record)
            session.attempts[exercise_id] = attempt + 1
            session.rendered.pop(exercise_id, None)
            store.log({"op": "answer", "session": session.session_id,
                       "exercise": exercise_id, "attempt": attempt,
                       "submission": body["answer"],
                       "verdict": record.verdict, "ts": record.timestamp})
        return {"attempt": attempt, **record.verdict}

    @app.get("/api/sessions/{session_id}/report")
    async def session_report(session_id: str):
        session = store.get(session_id)
        with session.lock:
            return {"session_id": session.session_id,
                    "answered": {
                        ex: [{"attempt": a.attempt,
                              "submission": a.submission,
                              "verdict": a.verdict,
                              "timestamp": a.timestamp}
                             for a in entries]
                        for ex, entries in session.history.items()}}

    @app.get("/api/traces/{trace_id}")
    async def get_trace(trace_id: str, request: Request):
        if teacher_secret is None:
            raise ApiError(401, "teacher_disabled",
                           "teacher endpoints are disabled (no secret "
                           "configured)")
        if request.headers.get("x-teacher-secret") != teacher_secret:
            raise ApiError(401, "unauthorized", "bad or missing secret")
        if trace_id not in captures:
            raise ApiError(404, "trace_not_found",
                           f"unknown trace {trace_id}")
        capture = captures[trace_id]
        packets = []
        for i, pkt in enumerate(capture.packets):
            tree = dissect.dissect_packet(pkt.data, capture.link_type)
            packets.append({"index": i, "ts_us": pkt.ts_us,
                            "hex": pkt.data.hex(),
                            "fields": _field_listing(tree)})
        return {"id": trace_id, "link_type": capture.link_type.name,
                "packets": packets}

    if static_dir:
        app.mount("/", StaticFiles(directory=static_dir, html=True),
                  name="static")

    return app


def _collect_captures(bank: Bank) -> dict[str, dissect.Capture]:
    """Name the captures used by trace questions after their question ids."""
    out = {}
    for qid in bank.ids():
        q = bank[qid]
        if isinstance(q, (exercises.TraceMaskQuestion,
                          exercises.ReorderQuestion)):
            out[qid] = q.capture
    return out
