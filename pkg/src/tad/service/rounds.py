"""Glue between the event store's reviews and curation.loop_round."""

from __future__ import annotations

import json
import logging
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional

from ..curation import (
    CurationStore,
    DatasetManifest,
    EventRecord,
    LoopRoundResult,
    ModelRecord,
    Provenance,
    ReviewVerdict,
    TrainingHook,
    VerdictKind,
    loop_round,
)
from ..tracking import ObjectClass
from .store import EventStore

logger = logging.getLogger(__name__)


class RoundError(Exception):
    pass


class ConsumedVerdicts:
    """Event ids whose FP verdicts already fed a round; optionally persisted."""

    def __init__(self, path: Optional[Path] = None):
        self._path = Path(path) if path else None
        self._ids: set[str] = set()
        if self._path and self._path.exists():
            self._ids = set(json.loads(self._path.read_text()))

    def __contains__(self, event_id: str) -> bool:
        return event_id in self._ids

    def __len__(self) -> int:
        return len(self._ids)

    def add(self, event_ids) -> None:
        self._ids.update(event_ids)
        if self._path:
            self._path.parent.mkdir(parents=True, exist_ok=True)
            self._path.write_text(json.dumps(sorted(self._ids)))


class RegisterOnlyTrainer:
    """Training hook that only records lineage (no model artifact).

    Stands in where no trainable detector is wired up, e.g. when the real
    trainer runs elsewhere: the round still collects FPs, composes the
    training set, and registers the manifest and model record.
    """

    def train(self, training_set: DatasetManifest, model_id: str) -> None:
        logger.info(
            "register-only trainer: %s composed with %d entries", model_id, len(training_set.entries)
        )

    def evaluate(self, model_id: str) -> dict:
        return {}


def unconsumed_fp_verdicts(
    event_store: EventStore, consumed: ConsumedVerdicts
) -> tuple[dict[str, EventRecord], list[ReviewVerdict]]:
    """Collect reviewed-as-FP events that no previous round has consumed."""
    events: dict[str, EventRecord] = {}
    verdicts: list[ReviewVerdict] = []
    for stored in event_store.events(status="reviewed"):
        if stored.event_id in consumed:
            continue
        review = stored.review
        if review["verdict"] != VerdictKind.FALSE_POSITIVE.value:
            continue
        negative = review.get("negative_class")
        verdicts.append(
            ReviewVerdict(
                event_id=stored.event_id,
                verdict=VerdictKind.FALSE_POSITIVE,
                reviewer=review["reviewer"],
                reviewed_at=datetime.fromisoformat(review["reviewed_at"]),
                negative_class=ObjectClass(negative) if negative else None,
            )
        )
        events[stored.event_id] = EventRecord(
            event_id=stored.event_id,
            event_type=stored.event.event_type,
            evidence_box=stored.event.evidence_box,
            image_ref=stored.image_ref,
        )
    return events, verdicts


def ensure_baseline(store: CurationStore, created: Optional[datetime] = None) -> str:
    """Register an empty labeled manifest and baseline model if none exist."""
    created = created or datetime.now(timezone.utc)
    if store.models.records():
        return store.models.records()[-1].model_id
    if "labeled" not in store.manifests:
        store.manifests.register(
            DatasetManifest(
                name="labeled", entries=(), provenance=Provenance.LABELED, created=created
            )
        )
    store.models.append(
        ModelRecord(model_id="model-0", composition=("labeled",), metrics={}, created=created)
    )
    return "model-0"


def run_curation_round(
    event_store: EventStore,
    curation_store: CurationStore,
    trainer: TrainingHook,
    consumed: ConsumedVerdicts,
    round_name: Optional[str] = None,
) -> LoopRoundResult:
    records = curation_store.models.records()
    if not records:
        raise RoundError("no baseline model registered; initialize the model registry first")
    current_model = records[-1].model_id
    name = round_name or f"round-{len(records)}"

    events, verdicts = unconsumed_fp_verdicts(event_store, consumed)
    result = loop_round(
        curation_store,
        current_model_id=current_model,
        events=events,
        verdicts=verdicts,
        trainer=trainer,
        new_manifest_name=f"fp-{name}",
        new_model_id=f"model-{name}",
    )
    consumed.add(result.consumed_event_ids)
    return result
