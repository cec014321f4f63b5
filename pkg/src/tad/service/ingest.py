"""Demultiplex detection-record streams by channel, quarantining bad lines.

Malformed lines never kill the run and are never silently dropped: each one
lands in the quarantine list with its line number and reason. Frame order
must be non-decreasing within a channel (several detections may share a
frame); a record that jumps backwards is quarantined with an ordering notice.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from .records import DetectionRecord, RecordError, parse_detection_line


@dataclass(frozen=True)
class QuarantinedLine:
    line_no: int
    raw: str
    reason: str


@dataclass
class IngestResult:
    streams: dict[str, list[DetectionRecord]] = field(default_factory=dict)
    quarantined: list[QuarantinedLine] = field(default_factory=list)
    total_lines: int = 0  # non-blank input lines

    @property
    def processed(self) -> int:
        return sum(len(records) for records in self.streams.values())


def ingest_lines(lines: Iterable[str]) -> IngestResult:
    """Parse and demultiplex; blank lines are not records and are skipped.

    Invariant: processed + len(quarantined) == total_lines.
    """
    result = IngestResult()
    last_frame: dict[str, int] = {}
    for line_no, raw in enumerate(lines, start=1):
        line = raw.rstrip("\n")
        if not line.strip():
            continue
        result.total_lines += 1
        try:
            record = parse_detection_line(line)
        except RecordError as exc:
            result.quarantined.append(QuarantinedLine(line_no, line, str(exc)))
            continue
        previous = last_frame.get(record.channel)
        if previous is not None and record.frame < previous:
            result.quarantined.append(
                QuarantinedLine(
                    line_no,
                    line,
                    f"out-of-order frame {record.frame} after {previous} "
                    f"on channel {record.channel} (ordering)",
                )
            )
            continue
        last_frame[record.channel] = record.frame
        result.streams.setdefault(record.channel, []).append(record)
    return result


def ingest_path(path: Path | str) -> IngestResult:
    with open(path, "r") as fh:
        return ingest_lines(fh)


def write_reject_log(result: IngestResult, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("a") as fh:
        for q in result.quarantined:
            fh.write(f"line {q.line_no}: {q.reason}\t{q.raw}\n")
