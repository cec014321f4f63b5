"""File-replay (or piped-stream) pipeline: ingest -> track -> incident rules
-> event store. Deterministic for identical (config, input)."""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import groupby
from pathlib import Path
from typing import Iterable, Optional

from ..incidents import IncidentEngine
from ..tracking import ChannelTracker
from .config import PipelineConfig
from .ingest import IngestResult, ingest_lines, ingest_path, write_reject_log
from .store import EventStore


@dataclass
class RunSummary:
    input_lines: int = 0
    processed_records: int = 0
    quarantined: int = 0
    skipped_off_stride: int = 0
    frames_per_channel: dict[str, int] = field(default_factory=dict)
    tracks_created: dict[str, int] = field(default_factory=dict)
    events_by_type: dict[str, int] = field(default_factory=dict)
    store_path: str = ""

    @property
    def event_count(self) -> int:
        return sum(self.events_by_type.values())

    def to_dict(self) -> dict:
        return {
            "input_lines": self.input_lines,
            "processed_records": self.processed_records,
            "quarantined": self.quarantined,
            "skipped_off_stride": self.skipped_off_stride,
            "frames_per_channel": self.frames_per_channel,
            "tracks_created": self.tracks_created,
            "events_by_type": self.events_by_type,
            "event_count": self.event_count,
            "store_path": self.store_path,
        }


def run_pipeline(
    config: PipelineConfig,
    source: Path | str | Iterable[str],
    event_store: Optional[EventStore] = None,
) -> RunSummary:
    """Replay a detection stream through tracking and incident judgment.

    The event store is opened (and so validated writable) before any input
    is consumed. Channels are processed in sorted order, each one strictly
    sequentially, so identical inputs give byte-identical event logs.
    """
    store = event_store or EventStore(config.event_log_path)

    if isinstance(source, (str, Path)):
        result: IngestResult = ingest_path(source)
    else:
        result = ingest_lines(source)
    if result.quarantined:
        write_reject_log(result, config.reject_log_path)

    summary = RunSummary(
        input_lines=result.total_lines,
        processed_records=result.processed,
        quarantined=len(result.quarantined),
        store_path=str(store.path),
    )

    for channel_id in sorted(result.streams):
        axis = config.travel_axis_for(channel_id)
        tracker = ChannelTracker(channel_id, config.tracker)
        engine = IncidentEngine(channel_id, axis, config.rules)
        frames = 0
        for frame_index, group in groupby(result.streams[channel_id], key=lambda r: r.frame):
            records = list(group)
            if frame_index % config.detection_stride != 0:
                summary.skipped_off_stride += len(records)
                continue
            frames += 1
            detections = [r.to_detection() for r in records]
            confirmed = tracker.step(frame_index, detections)
            wall_clock = records[0].t
            image_ref = next((r.image_ref for r in records if r.image_ref), None)
            for event in engine.process_frame(frame_index, detections, confirmed, wall_clock):
                store.append_event(event, image_ref=image_ref)
                key = event.event_type.value
                summary.events_by_type[key] = summary.events_by_type.get(key, 0) + 1
        summary.frames_per_channel[channel_id] = frames
        summary.tracks_created[channel_id] = tracker.tracks_created
    return summary
