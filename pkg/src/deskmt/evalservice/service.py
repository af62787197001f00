"""HTTP+JSON front of the annotation store.

Endpoint shapes are documented in docs/eval_service_api.md; the
annotation browser client consumes exactly these. Every annotator-facing
body is blind: no system names, file paths, or checkpoint names appear
before the report stage.
"""

from __future__ import annotations

from pathlib import Path

from fastapi import FastAPI, HTTPException, Query
from pydantic import BaseModel, Field

from .sessions import (DEFAULT_MAX_TOKENS, DEFAULT_SAMPLE_SIZE,
                       DuplicateJudgmentError, SessionError, SessionStore,
                       UnknownItemError, aggregate)


class CreateSessionRequest(BaseModel):
    sources: list[str]
    systems: dict[str, list[str]]
    seed: int = 0
    sample_size: int = DEFAULT_SAMPLE_SIZE
    max_tokens: int = DEFAULT_MAX_TOKENS
    annotator: str = "default"
    display_mode: str = "single"


class JudgmentRequest(BaseModel):
    token: str
    item_id: str
    score: int = Field(ge=0, le=5)
    overwrite: bool = False


def create_app(data_dir: str | Path) -> FastAPI:
    store = SessionStore(data_dir)
    app = FastAPI(title="deskmt human evaluation service")
    app.state.store = store

    def session_for(session_id: str, token: str):
        try:
            session = store.get(session_id)
        except SessionError:
            raise HTTPException(status_code=404, detail="unknown session")
        if token != session.token:
            raise HTTPException(status_code=403, detail="bad session token")
        return session

    @app.post("/sessions")
    def create(req: CreateSessionRequest):
        try:
            session = store.create(
                req.sources, req.systems, seed=req.seed, sample_size=req.sample_size,
                max_tokens=req.max_tokens, annotator=req.annotator,
                display_mode=req.display_mode)
        except SessionError as e:
            raise HTTPException(status_code=400, detail=str(e))
        return {"session_id": session.session_id, "token": session.token,
                "item_count": session.total, "display_mode": session.display_mode}

    @app.get("/sessions/{session_id}/next")
    def next_item(session_id: str, token: str = Query()):
        session = session_for(session_id, token)
        item = session.next_unjudged()
        if item is None:
            return {"done": True,
                    "progress": {"judged": session.judged, "total": session.total}}
        return session.annotator_view(item)

    @app.get("/sessions/{session_id}/next-group")
    def next_group(session_id: str, token: str = Query()):
        """Side-by-side view: one source with all its pending translations."""
        session = session_for(session_id, token)
        if session.display_mode != "grouped":
            raise HTTPException(status_code=400,
                                detail="session was created with single-item display")
        item = session.next_unjudged()
        if item is None:
            return {"done": True,
                    "progress": {"judged": session.judged, "total": session.total}}
        group = [it for it in session.items
                 if it.sentence_index == item.sentence_index
                 and it.item_id not in session.judgments]
        return {
            "source_text": item.source_text,
            "translations": [{"item_id": it.item_id,
                              "translation_text": it.translation_text}
                             for it in group],
            "progress": {"judged": session.judged, "total": session.total},
        }

    @app.post("/sessions/{session_id}/judgments")
    def judge(session_id: str, req: JudgmentRequest):
        session = session_for(session_id, req.token)
        try:
            return store.record_judgment(session.session_id, req.item_id, req.score,
                                         overwrite=req.overwrite)
        except UnknownItemError as e:
            raise HTTPException(status_code=404, detail=str(e))
        except DuplicateJudgmentError as e:
            raise HTTPException(status_code=409, detail=str(e))
        except SessionError as e:
            raise HTTPException(status_code=400, detail=str(e))

    @app.get("/sessions/{session_id}/report")
    def report(session_id: str, token: str = Query(), partial: bool = Query(False)):
        session = session_for(session_id, token)
        try:
            agg = aggregate(session, partial=partial)
        except SessionError as e:
            raise HTTPException(status_code=409, detail=str(e))
        return {
            "annotator": agg.annotator,
            "complete": agg.complete,
            "partial": not agg.complete,
            "systems": {
                name: {"counts": tally.counts, "judged": tally.judged,
                       "score_sum": tally.score_sum, "average": tally.average}
                for name, tally in sorted(agg.systems.items())
            },
        }

    return app
