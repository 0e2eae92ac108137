"""HTTP facade for driving sessions: create, score, advance, finish, export.

Single-process FastAPI app.  Sessions live in memory, are persisted to one
JSON document each after every mutation, and are reloaded lazily from the
data directory, so restarting the process loses nothing.  Requests within a
session serialize on that session's lock; different sessions run in
parallel.  Every non-success response carries exactly one error object:
``{"error": {"code", "message", "details"}}``.
"""
from __future__ import annotations

import os
import threading

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse, Response
from pydantic import BaseModel

from . import session as sessionmod
from .session import (
    PendingScoresError,
    Session,
    SessionConfig,
    SessionError,
    config_doc,
    config_from_doc,
)


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str, details: dict | None = None):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message
        self.details = details

    def response(self) -> JSONResponse:
        body = {"error": {"code": self.code, "message": self.message}}
        if self.details is not None:
            body["error"]["details"] = self.details
        return JSONResponse(status_code=self.status, content=body)


class SessionStore:
    """Directory-backed registry with one lock per session."""

    def __init__(self, data_dir: str):
        self.data_dir = data_dir
        os.makedirs(data_dir, exist_ok=True)
        self._sessions: dict[str, Session] = {}
        self._locks: dict[str, threading.Lock] = {}
        self._registry_lock = threading.Lock()

    def _path(self, session_id: str) -> str:
        return os.path.join(self.data_dir, f"{session_id}.json")

    def lock_for(self, session_id: str) -> threading.Lock:
        with self._registry_lock:
            return self._locks.setdefault(session_id, threading.Lock())

    def add(self, session: Session) -> None:
        with self._registry_lock:
            self._sessions[session.session_id] = session
            self._locks.setdefault(session.session_id, threading.Lock())
        self.persist(session)

    def get(self, session_id: str) -> Session:
        with self._registry_lock:
            if session_id in self._sessions:
                return self._sessions[session_id]
        path = self._path(session_id)
        if os.path.exists(path):
            loaded = sessionmod.load_from_path(path)
            with self._registry_lock:
                return self._sessions.setdefault(session_id, loaded)
        raise ApiError(404, "unknown_session", f"no session {session_id!r}")

    def persist(self, session: Session) -> None:
        sessionmod.save_to_path(session, self._path(session.session_id))

    def ids(self) -> list[str]:
        on_disk = {
            name[: -len(".json")]
            for name in os.listdir(self.data_dir)
            if name.endswith(".json")
        }
        with self._registry_lock:
            return sorted(on_disk | set(self._sessions))


class ScoreRequest(BaseModel):
    candidate_id: str
    score: float


def config_from_request(body: dict) -> SessionConfig:
    """Merge a partial config body over the defaults."""
    doc = config_doc(SessionConfig())
    unknown = set(body) - set(doc)
    if unknown:
        raise ApiError(422, "invalid_config", f"unknown config fields: {sorted(unknown)}")
    doc.update(body or {})
    try:
        return config_from_doc(doc)
    except (ValueError, TypeError, KeyError) as e:
        raise ApiError(422, "invalid_config", str(e)) from e


def create_app(data_dir: str = "sessions") -> FastAPI:
    app = FastAPI(title="evomelody", docs_url=None, redoc_url=None)
    store = SessionStore(data_dir)
    app.state.store = store

    @app.exception_handler(ApiError)
    async def handle_api_error(request: Request, exc: ApiError):
        return exc.response()

    @app.exception_handler(RequestValidationError)
    async def handle_validation_error(request: Request, exc: RequestValidationError):
        return ApiError(422, "invalid_request", str(exc)).response()

    @app.post("/sessions", status_code=201)
    def create_session(body: dict | None = None):
        cfg = config_from_request(body or {})
        sess = sessionmod.create_session(cfg)
        store.add(sess)
        return sess.summary()

    @app.get("/sessions")
    def list_sessions():
        return {"sessions": [store.get(sid).summary() for sid in store.ids()]}

    @app.get("/sessions/{session_id}/round")
    def get_round(session_id: str):
        return store.get(session_id).round_view()

    @app.post("/sessions/{session_id}/scores")
    def submit_score(session_id: str, body: ScoreRequest):
        sess = store.get(session_id)
        with store.lock_for(session_id):
            try:
                sess.submit_score(body.candidate_id, body.score)
            except KeyError as e:
                raise ApiError(404, "unknown_candidate", str(e)) from e
            except (SessionError, ValueError) as e:
                raise ApiError(422, "invalid_score", str(e)) from e
            store.persist(sess)
            return {
                "state": sess.state,
                "pending": sess.pending(),
                "advance_enabled": sess.state == sessionmod.READY_TO_ADVANCE,
            }

    @app.post("/sessions/{session_id}/advance")
    def advance(session_id: str):
        sess = store.get(session_id)
        with store.lock_for(session_id):
            try:
                sess.advance()
            except PendingScoresError as e:
                raise ApiError(
                    409, "pending_scores", str(e), details={"pending": e.pending}
                ) from e
            except SessionError as e:
                raise ApiError(409, "state_conflict", str(e)) from e
            store.persist(sess)
            return sess.round_view()

    @app.post("/sessions/{session_id}/finish")
    def finish(session_id: str):
        sess = store.get(session_id)
        with store.lock_for(session_id):
            export_dir = os.path.join(store.data_dir, "exports", sess.session_id)
            manifest = sess.finish(export_dir=export_dir)
            store.persist(sess)
            return manifest

    @app.get("/sessions/{session_id}/midi/{candidate_id}")
    def candidate_midi(session_id: str, candidate_id: str):
        sess = store.get(session_id)
        try:
            genes = sess.candidate_genes(candidate_id)
        except KeyError as e:
            raise ApiError(404, "unknown_candidate", str(e)) from e
        data = sess.render_smf(genes)
        return Response(
            content=data,
            media_type="audio/midi",
            headers={"Content-Disposition": f'attachment; filename="{candidate_id}.mid"'},
        )

    return app
