"""Append-only event store: JSON lines plus an in-memory index.

Events are immutable once written; a review lands as an amendment line
({"id", "review"}) that the loader merges back onto its event, keeping the
file append-only while ids stay unique and stable across restarts.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path
from typing import Optional

from ..curation import ReviewVerdict
from ..geometry import BoundingBox
from ..incidents import IncidentEvent, IncidentType


class StoreError(Exception):
    pass


class UnknownEventIdError(StoreError):
    pass


@dataclass
class StoredEvent:
    event_id: str
    event: IncidentEvent
    image_ref: Optional[str] = None
    review: Optional[dict] = None

    @property
    def reviewed(self) -> bool:
        return self.review is not None

    def to_dict(self) -> dict:
        doc = {
            "id": self.event_id,
            "event_type": self.event.event_type.value,
            "channel": self.event.channel_id,
            "frame_start": self.event.frame_start,
            "frame_end": self.event.frame_end,
            "box": self.event.evidence_box.as_list(),
            "score": self.event.score,
            "t": self.event.wall_clock.isoformat(),
        }
        if self.event.track_id is not None:
            doc["track_id"] = self.event.track_id
        if self.image_ref is not None:
            doc["image_ref"] = self.image_ref
        if self.review is not None:
            doc["review"] = self.review
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "StoredEvent":
        event = IncidentEvent(
            event_type=IncidentType(doc["event_type"]),
            channel_id=doc["channel"],
            frame_start=doc["frame_start"],
            frame_end=doc["frame_end"],
            evidence_box=BoundingBox.from_list(doc["box"]),
            score=doc["score"],
            wall_clock=datetime.fromisoformat(doc["t"]),
            track_id=doc.get("track_id"),
        )
        return cls(
            event_id=doc["id"],
            event=event,
            image_ref=doc.get("image_ref"),
            review=doc.get("review"),
        )


class EventStore:
    """Single-writer append log; any number of in-process readers."""

    def __init__(self, path: Path | str):
        self._path = Path(path)
        self._lock = threading.Lock()
        self._events: dict[str, StoredEvent] = {}
        self._order: list[str] = []
        self._next_id = 1
        self._path.parent.mkdir(parents=True, exist_ok=True)
        if self._path.exists():
            self._load()
        else:
            self._path.touch()

    @property
    def path(self) -> Path:
        return self._path

    def _load(self) -> None:
        for line in self._path.read_text().splitlines():
            if not line.strip():
                continue
            doc = json.loads(line)
            if "event_type" in doc:
                stored = StoredEvent.from_dict(doc)
                self._events[stored.event_id] = stored
                self._order.append(stored.event_id)
                suffix = stored.event_id.rsplit("-", 1)[-1]
                if suffix.isdigit():
                    self._next_id = max(self._next_id, int(suffix) + 1)
            elif "review" in doc:
                event_id = doc["id"]
                if event_id in self._events:
                    self._events[event_id].review = doc["review"]

    def _append_line(self, doc: dict) -> None:
        with self._path.open("a") as fh:
            fh.write(json.dumps(doc, sort_keys=True) + "\n")

    def append_event(self, event: IncidentEvent, image_ref: Optional[str] = None) -> StoredEvent:
        with self._lock:
            event_id = f"evt-{self._next_id:06d}"
            self._next_id += 1
            stored = StoredEvent(event_id=event_id, event=event, image_ref=image_ref)
            self._events[event_id] = stored
            self._order.append(event_id)
            self._append_line(stored.to_dict())
            return stored

    def record_review(self, event_id: str, verdict: ReviewVerdict) -> StoredEvent:
        """Attach a review; idempotent per (event, reviewer) payload."""
        with self._lock:
            stored = self._events.get(event_id)
            if stored is None:
                raise UnknownEventIdError(event_id)
            review = {
                "verdict": verdict.verdict.value,
                "reviewer": verdict.reviewer,
                "reviewed_at": verdict.reviewed_at.isoformat(),
            }
            if verdict.negative_class is not None:
                review["negative_class"] = verdict.negative_class.value
            unchanged = (
                stored.review is not None
                and {k: v for k, v in stored.review.items() if k != "reviewed_at"}
                == {k: v for k, v in review.items() if k != "reviewed_at"}
            )
            if unchanged:
                return stored
            stored.review = review
            self._append_line({"id": event_id, "review": review})
            return stored

    def get(self, event_id: str) -> Optional[StoredEvent]:
        return self._events.get(event_id)

    def __len__(self) -> int:
        return len(self._order)

    def events(
        self,
        status: Optional[str] = None,
        event_type: Optional[IncidentType] = None,
        channel: Optional[str] = None,
    ) -> list[StoredEvent]:
        """Filtered events in append order. status: 'reviewed' | 'unreviewed'."""
        if status not in (None, "reviewed", "unreviewed"):
            raise ValueError(f"status must be 'reviewed' or 'unreviewed', got {status!r}")
        out = []
        for event_id in self._order:
            stored = self._events[event_id]
            if status == "reviewed" and not stored.reviewed:
                continue
            if status == "unreviewed" and stored.reviewed:
                continue
            if event_type is not None and stored.event.event_type is not event_type:
                continue
            if channel is not None and stored.event.channel_id != channel:
                continue
            out.append(stored)
        return out

    def incident_events(self) -> list[IncidentEvent]:
        return [self._events[i].event for i in self._order]
