"""HTTP surface over the experiment engine."""

from __future__ import annotations

from fastapi import FastAPI, HTTPException, Response
from pydantic import BaseModel

from .analysis import EmptyDatasetError
from .engine import (
    DuplicateSubmissionError,
    Engine,
    InvalidChoiceError,
    UnknownSessionError,
    WrongStageError,
)
from .matchmaking import RoomFullError


class ActionRequest(BaseModel):
    action: int
    round_token: str


class PreferenceRequest(BaseModel):
    label: str


class SurveyRequest(BaseModel):
    answers: dict = {}


def create_app(engine: Engine) -> FastAPI:
    app = FastAPI(title="coopcube", version="0.1.0")

    def run(fn, *args):
        try:
            return fn(*args)
        except UnknownSessionError as e:
            raise HTTPException(status_code=404, detail=f"unknown session: {e}")
        except (WrongStageError, InvalidChoiceError, DuplicateSubmissionError) as e:
            raise HTTPException(status_code=409, detail=str(e))
        except RoomFullError as e:
            raise HTTPException(status_code=503, detail=f"room full: {e}")
        except EmptyDatasetError as e:
            raise HTTPException(status_code=409, detail=str(e))

    @app.get("/api/health")
    def health() -> dict:
        return {
            "status": "ok",
            "sessions": len(engine.sessions),
            "events": len(engine.log),
        }

    @app.post("/api/session")
    def create_session() -> dict:
        return run(engine.create_session)

    @app.get("/api/session/{session_id}/state")
    def get_state(session_id: str) -> dict:
        return run(engine.get_state, session_id)

    @app.post("/api/session/{session_id}/advance")
    def advance(session_id: str) -> dict:
        return run(engine.advance, session_id)

    @app.post("/api/session/{session_id}/action")
    def submit_action(session_id: str, body: ActionRequest) -> dict:
        return run(engine.submit_action, session_id, body.action, body.round_token)

    @app.post("/api/session/{session_id}/preference")
    def submit_preference(session_id: str, body: PreferenceRequest) -> dict:
        return run(engine.submit_preference, session_id, body.label)

    @app.post("/api/session/{session_id}/survey")
    def submit_survey(session_id: str, body: SurveyRequest) -> dict:
        return run(engine.submit_survey, session_id, body.answers)

    @app.get("/api/admin/export/trials")
    def export_trials() -> Response:
        return Response(content=run(engine.export_trials), media_type="text/csv")

    @app.get("/api/admin/export/preferences")
    def export_preferences() -> Response:
        return Response(content=run(engine.export_preferences), media_type="text/csv")

    @app.get("/api/admin/export/summary")
    def export_summary() -> dict:
        return run(engine.export_summary)

    return app
