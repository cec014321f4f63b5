"""Operational shell: ingestion, persistence, pipeline runner, HTTP API, CLI."""

from .records import DetectionRecord, RecordError, parse_detection_record
from .ingest import IngestResult, QuarantinedLine, ingest_lines, ingest_path
from .store import EventStore, StoredEvent
from .config import ChannelConfig, ConfigError, PipelineConfig
from .pipeline import RunSummary, run_pipeline

__all__ = [
    "DetectionRecord",
    "RecordError",
    "parse_detection_record",
    "IngestResult",
    "QuarantinedLine",
    "ingest_lines",
    "ingest_path",
    "EventStore",
    "StoredEvent",
    "ChannelConfig",
    "ConfigError",
    "PipelineConfig",
    "RunSummary",
    "run_pipeline",
]
