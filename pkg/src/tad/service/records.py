"""Wire form of detections: one JSON object per line.

Field names are part of the on-disk contract:
{"channel", "frame", "t", "class", "conf", "box": [x_min, y_min, x_max, y_max],
 "image_ref"?}
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from datetime import datetime
from typing import Optional

from ..geometry import BoundingBox
from ..tracking import Detection, ObjectClass


class RecordError(ValueError):
    pass


@dataclass(frozen=True)
class DetectionRecord:
    channel: str
    frame: int
    t: datetime
    object_class: ObjectClass
    conf: float
    box: BoundingBox
    image_ref: Optional[str] = None

    def to_detection(self) -> Detection:
        return Detection(
            box=self.box,
            object_class=self.object_class,
            confidence=self.conf,
            frame_index=self.frame,
            channel_id=self.channel,
        )

    def to_dict(self) -> dict:
        doc = {
            "channel": self.channel,
            "frame": self.frame,
            "t": self.t.isoformat(),
            "class": self.object_class.value,
            "conf": self.conf,
            "box": self.box.as_list(),
        }
        if self.image_ref is not None:
            doc["image_ref"] = self.image_ref
        return doc

    def to_json_line(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def parse_detection_record(doc: dict) -> DetectionRecord:
    """Validate one decoded JSON object into a DetectionRecord.

    Raises RecordError naming the offending field; the caller decides whether
    to quarantine or abort.
    """
    if not isinstance(doc, dict):
        raise RecordError(f"record must be a JSON object, got {type(doc).__name__}")
    missing = [k for k in ("channel", "frame", "t", "class", "conf", "box") if k not in doc]
    if missing:
        raise RecordError(f"missing fields: {', '.join(missing)}")

    channel = doc["channel"]
    if not isinstance(channel, str) or not channel:
        raise RecordError("channel must be a non-empty string")

    frame = doc["frame"]
    if not isinstance(frame, int) or isinstance(frame, bool) or frame < 0:
        raise RecordError(f"frame must be a non-negative integer, got {frame!r}")

    try:
        t = datetime.fromisoformat(doc["t"])
    except (TypeError, ValueError) as exc:
        raise RecordError(f"t is not an ISO-8601 timestamp: {doc['t']!r}") from exc

    try:
        object_class = ObjectClass(doc["class"])
    except ValueError as exc:
        raise RecordError(f"unknown class {doc['class']!r}") from exc

    conf = doc["conf"]
    if not isinstance(conf, (int, float)) or isinstance(conf, bool) or not 0.0 <= conf <= 1.0:
        raise RecordError(f"conf must be in [0,1], got {conf!r}")

    box = doc["box"]
    if not isinstance(box, (list, tuple)) or len(box) != 4:
        raise RecordError(f"box must be [x_min, y_min, x_max, y_max], got {box!r}")
    try:
        bounding_box = BoundingBox.from_list(box)
    except (TypeError, ValueError) as exc:
        raise RecordError(f"invalid box {box!r}: {exc}") from exc

    image_ref = doc.get("image_ref")
    if image_ref is not None and not isinstance(image_ref, str):
        raise RecordError("image_ref must be a string when present")

    return DetectionRecord(
        channel=channel,
        frame=frame,
        t=t,
        object_class=object_class,
        conf=float(conf),
        box=bounding_box,
        image_ref=image_ref,
    )


def parse_detection_line(line: str) -> DetectionRecord:
    try:
        doc = json.loads(line)
    except json.JSONDecodeError as exc:
        raise RecordError(f"unparseable JSON: {exc}") from exc
    return parse_detection_record(doc)
