"""Measurement apparatus: detection outcomes, AP, FP re-inference, alarm series.

Pure functions over immutable detection/event logs. TN here has the one
countable meaning available to a detection system: a negative-class
detection that vetoed a would-be false alarm of its paired class.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from .geometry import BoundingBox, overlap_area_ratio
from .incidents import IncidentEvent, IncidentType, suppress_by_negative_class
from .tracking import NEGATIVE_FOR, POSITIVE_CLASSES, Detection, ObjectClass


class EvaluationError(Exception):
    pass


class AbsentClassError(EvaluationError):
    """AP requested for a class with no ground-truth objects."""


@dataclass(frozen=True)
class GroundTruthFrame:
    frame_index: int
    channel_id: str
    objects: tuple[tuple[BoundingBox, ObjectClass], ...]

    def __post_init__(self) -> None:
        objs = tuple((box, ObjectClass(cls)) for box, cls in self.objects)
        for _, cls in objs:
            if cls not in POSITIVE_CLASSES:
                raise ValueError(f"ground truth may only contain positive classes, got {cls}")
        object.__setattr__(self, "objects", objs)


@dataclass
class OutcomeCount:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0


@dataclass(frozen=True)
class PrPoint:
    precision: float
    recall: float
    threshold: float


def _would_match(det: Detection, truth_objects, iou_threshold: float) -> bool:
    return any(
        cls is det.object_class and overlap_area_ratio(det.box, box) >= iou_threshold
        for box, cls in truth_objects
    )


def categorize(
    detections: Sequence[Detection],
    truth: GroundTruthFrame,
    iou_match_threshold: float = 0.5,
) -> dict[ObjectClass, OutcomeCount]:
    """Per-class TP/FP/FN/TN for one frame.

    Positive-class detections are matched greedily in descending confidence
    to same-class truth at IoU >= threshold, one-to-one. Suppressed
    candidates (vetoed by an overlapping, higher-confidence negative) never
    reach matching; each negative detection that vetoed at least one
    would-be FP counts one TN under its paired class.
    """
    if not 0.0 < iou_match_threshold < 1.0:
        raise ValueError(f"iou_match_threshold must be in (0,1), got {iou_match_threshold}")
    counts: dict[ObjectClass, OutcomeCount] = {cls: OutcomeCount() for cls in POSITIVE_CLASSES}
    negatives = [d for d in detections if d.object_class in NEGATIVE_FOR.values()]
    positives = [d for d in detections if d.object_class in POSITIVE_CLASSES]

    suppressed: list[Detection] = []
    active: list[Detection] = []
    for det in positives:
        if det.object_class in NEGATIVE_FOR and suppress_by_negative_class(det, negatives):
            suppressed.append(det)
        else:
            active.append(det)

    for cls in POSITIVE_CLASSES:
        truths = [box for box, c in truth.objects if c is cls]
        dets = sorted(
            (d for d in active if d.object_class is cls), key=lambda d: -d.confidence
        )
        matched: set[int] = set()
        for det in dets:
            best_idx, best_iou = -1, 0.0
            for i, tbox in enumerate(truths):
                if i in matched:
                    continue
                iou = overlap_area_ratio(det.box, tbox)
                if iou > best_iou:
                    best_idx, best_iou = i, iou
            if best_idx >= 0 and best_iou >= iou_match_threshold:
                matched.add(best_idx)
                counts[cls].tp += 1
            else:
                counts[cls].fp += 1
        counts[cls].fn += len(truths) - len(matched)

    for neg in negatives:
        paired = next(pos for pos, n in NEGATIVE_FOR.items() if n is neg.object_class)
        vetoed_fp = any(
            det.object_class is paired
            and suppress_by_negative_class(det, [neg])
            and not _would_match(det, truth.objects, iou_match_threshold)
            for det in suppressed
        )
        if vetoed_fp:
            counts[paired].tn += 1
    return counts


def _match_flags(
    detections: Sequence[Detection],
    truth_frames: Sequence[GroundTruthFrame],
    object_class: ObjectClass,
    iou_match_threshold: float,
) -> tuple[np.ndarray, np.ndarray, int]:
    """Confidence-ordered TP flags for one class over a whole dataset."""
    truth_by_frame: dict[tuple[str, int], list[BoundingBox]] = defaultdict(list)
    n_truth = 0
    for frame in truth_frames:
        for box, cls in frame.objects:
            if cls is object_class:
                truth_by_frame[(frame.channel_id, frame.frame_index)].append(box)
                n_truth += 1
    if n_truth == 0:
        raise AbsentClassError(f"no ground-truth objects of class {object_class.value}")

    dets = [d for d in detections if d.object_class is object_class]
    order = sorted(range(len(dets)), key=lambda i: -dets[i].confidence)
    matched: dict[tuple[str, int], set[int]] = defaultdict(set)
    tp_flags = np.zeros(len(order), dtype=bool)
    confidences = np.zeros(len(order))
    for rank, i in enumerate(order):
        det = dets[i]
        key = (det.channel_id, det.frame_index)
        confidences[rank] = det.confidence
        best_idx, best_iou = -1, 0.0
        for j, tbox in enumerate(truth_by_frame.get(key, ())):
            if j in matched[key]:
                continue
            iou = overlap_area_ratio(det.box, tbox)
            if iou > best_iou:
                best_idx, best_iou = j, iou
        if best_idx >= 0 and best_iou >= iou_match_threshold:
            matched[key].add(best_idx)
            tp_flags[rank] = True
    return tp_flags, confidences, n_truth


def pr_curve(
    detections: Sequence[Detection],
    truth_frames: Sequence[GroundTruthFrame],
    object_class: ObjectClass,
    iou_match_threshold: float = 0.5,
) -> list[PrPoint]:
    """Precision/recall sweep across descending confidence thresholds."""
    tp_flags, confidences, n_truth = _match_flags(
        detections, truth_frames, object_class, iou_match_threshold
    )
    points = []
    tp = fp = 0
    for flag, conf in zip(tp_flags, confidences):
        tp += int(flag)
        fp += int(not flag)
        points.append(PrPoint(precision=tp / (tp + fp), recall=tp / n_truth, threshold=float(conf)))
    return points


def average_precision(
    detections: Sequence[Detection],
    truth_frames: Sequence[GroundTruthFrame],
    object_class: ObjectClass,
    iou_match_threshold: float = 0.5,
) -> float:
    """All-point interpolated AP for one class.

    Detections are ranked by confidence; precision is made monotone from the
    right and integrated over the recall steps.
    """
    tp_flags, _, n_truth = _match_flags(detections, truth_frames, object_class, iou_match_threshold)
    if len(tp_flags) == 0:
        return 0.0
    tp_cum = np.cumsum(tp_flags)
    fp_cum = np.cumsum(~tp_flags)
    recall = tp_cum / n_truth
    precision = tp_cum / (tp_cum + fp_cum)

    mrec = np.concatenate(([0.0], recall, [recall[-1]]))
    mpre = np.concatenate(([0.0], precision, [0.0]))
    for i in range(mpre.size - 2, -1, -1):
        mpre[i] = max(mpre[i], mpre[i + 1])
    steps = np.where(mrec[1:] != mrec[:-1])[0]
    return float(np.sum((mrec[steps + 1] - mrec[steps]) * mpre[steps + 1]))


def fp_reinference_rate(
    infer: Callable[[object], Iterable],
    fp_images: Sequence,
    target_class: ObjectClass,
) -> float:
    """Percentage of collected FP images on which ``infer`` still emits the
    positive target class."""
    if len(fp_images) == 0:
        raise EvaluationError("fp_reinference_rate over an empty image set is undefined")
    target = ObjectClass(target_class)
    hits = 0
    for image in fp_images:
        if any(ObjectClass(d.object_class) is target for d in infer(image)):
            hits += 1
    return 100.0 * hits / len(fp_images)


def _floor_bucket(t: datetime, bucket: str) -> datetime:
    t = t.astimezone(timezone.utc) if t.tzinfo else t.replace(tzinfo=timezone.utc)
    if bucket == "hour":
        return t.replace(minute=0, second=0, microsecond=0)
    if bucket == "day":
        return t.replace(hour=0, minute=0, second=0, microsecond=0)
    raise ValueError(f"bucket must be 'hour' or 'day', got {bucket!r}")


_BUCKET_STEP = {"hour": timedelta(hours=1), "day": timedelta(days=1)}


@dataclass
class AlarmSeries:
    bucket: str
    bucket_starts: list[datetime] = field(default_factory=list)
    # (channel_id, event_type) -> per-bucket counts aligned with bucket_starts
    series: dict[tuple[str, IncidentType], list[int]] = field(default_factory=dict)

    @property
    def total(self) -> int:
        return sum(sum(counts) for counts in self.series.values())

    def to_dict(self) -> dict:
        return {
            "bucket": self.bucket,
            "bucket_starts": [t.isoformat() for t in self.bucket_starts],
            "series": [
                {"channel": channel, "event_type": etype.value, "counts": counts}
                for (channel, etype), counts in sorted(
                    self.series.items(), key=lambda kv: (kv[0][0], kv[0][1].value)
                )
            ],
            "total": self.total,
        }


def alarm_series(
    events: Sequence[IncidentEvent],
    bucket: str = "day",
    start: Optional[datetime] = None,
    end: Optional[datetime] = None,
) -> AlarmSeries:
    """Bucketed alarm counts per (channel, event type).

    Every bucket in the covered range appears explicitly, zeros included.
    Without an explicit range the events' own span is used; events outside a
    given range are excluded.
    """
    step = _BUCKET_STEP[bucket]  # validates bucket
    times = [e.wall_clock for e in events]
    lo = _floor_bucket(start if start is not None else min(times), bucket) if (start or times) else None
    hi = _floor_bucket(end if end is not None else max(times), bucket) if (end or times) else None
    result = AlarmSeries(bucket=bucket)
    if lo is None or hi is None or lo > hi:
        return result

    starts = []
    t = lo
    while t <= hi:
        starts.append(t)
        t = t + step
    result.bucket_starts = starts
    index = {t: i for i, t in enumerate(starts)}

    for event in events:
        b = _floor_bucket(event.wall_clock, bucket)
        if b not in index:
            continue
        key = (event.channel_id, event.event_type)
        if key not in result.series:
            result.series[key] = [0] * len(starts)
        result.series[key][index[b]] += 1
    return result
