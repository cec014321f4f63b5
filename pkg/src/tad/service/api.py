"""HTTP JSON API for the review workflow: browse events, file verdicts,
watch alarm statistics, trigger curation rounds."""

from __future__ import annotations

import threading
from datetime import datetime, timezone
from typing import Optional

from fastapi import FastAPI, HTTPException, Query
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel, Field

from ..curation import CurationError, CurationStore, ReviewVerdict, TrainingHook, VerdictKind, check_verdict_against_event
from ..evaluation import alarm_series
from ..incidents import IncidentType
from ..tracking import ObjectClass
from .rounds import ConsumedVerdicts, RoundError, run_curation_round
from .store import EventStore


class VerdictBody(BaseModel):
    verdict: str = Field(description="true_positive or false_positive")
    negative_class: Optional[str] = None
    reviewer: str = Field(min_length=1)


class RoundBody(BaseModel):
    round_name: Optional[str] = None


def _parse_event_type(value: Optional[str]) -> Optional[IncidentType]:
    if value is None:
        return None
    try:
        return IncidentType(value)
    except ValueError:
        raise HTTPException(status_code=400, detail=f"unknown event type {value!r}")


def create_app(
    event_store: EventStore,
    curation_store: Optional[CurationStore] = None,
    trainer: Optional[TrainingHook] = None,
    consumed: Optional[ConsumedVerdicts] = None,
) -> FastAPI:
    curation_store = curation_store or CurationStore()
    consumed = consumed or ConsumedVerdicts()
    round_lock = threading.Lock()
    app = FastAPI(title="tunnel incident review")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )

    @app.get("/events")
    def list_events(
        status: Optional[str] = None,
        type: Optional[str] = None,
        channel: Optional[str] = None,
        page: int = Query(default=1, ge=1),
        page_size: int = Query(default=20, ge=1, le=500),
    ):
        event_type = _parse_event_type(type)
        try:
            matching = event_store.events(status=status, event_type=event_type, channel=channel)
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        total = len(matching)
        pages = max((total + page_size - 1) // page_size, 1)
        start = (page - 1) * page_size
        items = matching[start : start + page_size]
        return {
            "events": [e.to_dict() for e in items],
            "page": page,
            "page_size": page_size,
            "total": total,
            "pages": pages,
        }

    @app.get("/events/{event_id}")
    def get_event(event_id: str):
        stored = event_store.get(event_id)
        if stored is None:
            raise HTTPException(status_code=404, detail=f"unknown event {event_id!r}")
        return stored.to_dict()

    @app.post("/events/{event_id}/verdict")
    def post_verdict(event_id: str, body: VerdictBody):
        stored = event_store.get(event_id)
        if stored is None:
            raise HTTPException(status_code=404, detail=f"unknown event {event_id!r}")
        try:
            verdict = ReviewVerdict(
                event_id=event_id,
                verdict=VerdictKind(body.verdict),
                reviewer=body.reviewer,
                reviewed_at=datetime.now(timezone.utc),
                negative_class=ObjectClass(body.negative_class) if body.negative_class else None,
            )
            check_verdict_against_event(verdict, stored.event.event_type)
        except (ValueError, CurationError) as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        with curation_store.write_lock:
            updated = event_store.record_review(event_id, verdict)
        return updated.to_dict()

    @app.get("/stats/alarms")
    def alarm_stats(
        bucket: str = Query(default="day"),
        channel: Optional[str] = None,
        type: Optional[str] = None,
    ):
        event_type = _parse_event_type(type)
        stored = event_store.events(event_type=event_type, channel=channel)
        try:
            series = alarm_series([s.event for s in stored], bucket=bucket)
        except (KeyError, ValueError):
            raise HTTPException(status_code=400, detail=f"bucket must be 'hour' or 'day', got {bucket!r}")
        doc = series.to_dict()
        doc["round_markers"] = [r.created.isoformat() for r in curation_store.models.records()[1:]]
        return doc

    @app.get("/models")
    def list_models():
        return {"models": [r.to_dict() for r in curation_store.models.records()]}

    @app.post("/curation/round")
    def trigger_round(body: RoundBody):
        if trainer is None:
            raise HTTPException(status_code=409, detail="no trainer configured")
        if not round_lock.acquire(blocking=False):
            raise HTTPException(status_code=409, detail="a curation round is already in progress")
        try:
            result = run_curation_round(
                event_store, curation_store, trainer, consumed, body.round_name
            )
        except RoundError as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        except CurationError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        finally:
            round_lock.release()
        return result.to_dict()

    return app
