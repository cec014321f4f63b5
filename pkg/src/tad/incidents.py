"""Incident rules: fire, person, stoppage, and wrong-way alarms.

Stoppage and wrong-way are judged from a confirmed track's box window over a
judgment period much longer than the per-frame detection step. Fire and
person alarms come straight from detections through a persistence filter,
with negative-class detections able to veto a would-be alarm.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime
from enum import Enum
from typing import Optional, Sequence

from .geometry import (
    BoundingBox,
    Movement,
    TravelAxis,
    displacement_sign,
    overlap_area_ratio,
    overlapped_line_length_ratio,
)
from .tracking import (
    NEGATIVE_FOR,
    Detection,
    ObjectClass,
    Track,
    TrackStatus,
)


class IncidentType(str, Enum):
    FIRE = "fire"
    PERSON = "person"
    STOPPAGE = "stoppage"
    WRONG_WAY = "wrong_way"


TRACK_EVENT_TYPES = (IncidentType.STOPPAGE, IncidentType.WRONG_WAY)
PRESENCE_EVENT_TYPES = {ObjectClass.FIRE: IncidentType.FIRE, ObjectClass.PERSON: IncidentType.PERSON}


@dataclass(frozen=True)
class IncidentEvent:
    event_type: IncidentType
    channel_id: str
    frame_start: int
    frame_end: int
    evidence_box: BoundingBox
    score: float
    wall_clock: datetime
    track_id: Optional[int] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "event_type", IncidentType(self.event_type))
        if self.frame_start > self.frame_end:
            raise ValueError(f"frame_start {self.frame_start} > frame_end {self.frame_end}")
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"score must be in [0,1], got {self.score}")
        needs_track = self.event_type in TRACK_EVENT_TYPES
        if needs_track and self.track_id is None:
            raise ValueError(f"{self.event_type.value} event requires a track_id")
        if not needs_track and self.track_id is not None:
            raise ValueError(f"{self.event_type.value} event must not carry a track_id")


def _default_confidence_floor() -> dict[ObjectClass, float]:
    return {ObjectClass.FIRE: 0.5, ObjectClass.PERSON: 0.5}


@dataclass(frozen=True)
class RuleConfig:
    # A track whose window-min overlap with its anchor box is at or above
    # this is a stopped car ("0.9 or more" is inclusive).
    stoppage_overlap_threshold: float = 0.9
    # Wrong-way requires backward travel with the line overlap strictly
    # below this ("less than 0.75" is exclusive).
    wrongway_line_ratio_threshold: float = 0.75
    # ~3 s at 25 fps; long enough to separate a stop from congestion creep.
    judgment_window_frames: int = 75
    alarm_cooldown_frames: int = 300
    persistence_frames: int = 3
    confidence_floor: dict[ObjectClass, float] = field(default_factory=_default_confidence_floor)
    direction_dead_band: float = 0.5
    # Negative-class veto: overlap required between candidate and negative.
    suppression_overlap: float = 0.5

    def __post_init__(self) -> None:
        if not 0.0 < self.stoppage_overlap_threshold < 1.0:
            raise ValueError("stoppage_overlap_threshold must be in (0,1)")
        if not 0.0 < self.wrongway_line_ratio_threshold < 1.0:
            raise ValueError("wrongway_line_ratio_threshold must be in (0,1)")
        if self.judgment_window_frames <= 0 or self.alarm_cooldown_frames <= 0:
            raise ValueError("window lengths must be positive")
        if self.persistence_frames <= 0:
            raise ValueError("persistence_frames must be positive")


BoxWindow = Sequence[tuple[int, BoundingBox]]


def _window_spans(window: BoxWindow, required_frames: int) -> bool:
    if len(window) < 2:
        return False
    return window[-1][0] - window[0][0] + 1 >= required_frames


def judge_stoppage(
    track: Track,
    window: BoxWindow,
    cfg: RuleConfig,
    channel_id: str,
    wall_clock: datetime,
) -> Optional[IncidentEvent]:
    """Stoppage: every box in the window still overlaps the window's first box.

    The anchor comparison is deliberate: consecutive-frame overlap is near 1
    even for slow drift, so only an anchored ratio makes the threshold mean
    "has not moved". Returns None when the window is too short.
    """
    if track.status is not TrackStatus.CONFIRMED:
        return None
    if not _window_spans(window, cfg.judgment_window_frames):
        return None
    anchor = window[0][1]
    min_ratio = min(overlap_area_ratio(anchor, box) for _, box in window)
    if min_ratio < cfg.stoppage_overlap_threshold:
        return None
    return IncidentEvent(
        event_type=IncidentType.STOPPAGE,
        channel_id=channel_id,
        frame_start=window[0][0],
        frame_end=window[-1][0],
        evidence_box=window[-1][1],
        score=min_ratio,
        wall_clock=wall_clock,
        track_id=track.track_id,
    )


def judge_wrong_way(
    track: Track,
    window: BoxWindow,
    ax: TravelAxis,
    cfg: RuleConfig,
    channel_id: str,
    wall_clock: datetime,
) -> Optional[IncidentEvent]:
    """Wrong-way: net backward travel with the line overlap below threshold."""
    if track.status is not TrackStatus.CONFIRMED:
        return None
    if not _window_spans(window, cfg.judgment_window_frames):
        return None
    first, last = window[0][1], window[-1][1]
    moved = displacement_sign(first, last, ax, cfg.direction_dead_band)
    if moved is not Movement.BACKWARD:
        return None
    ratio = overlapped_line_length_ratio(first, last, ax)
    if ratio >= cfg.wrongway_line_ratio_threshold:
        return None
    return IncidentEvent(
        event_type=IncidentType.WRONG_WAY,
        channel_id=channel_id,
        frame_start=window[0][0],
        frame_end=window[-1][0],
        evidence_box=last,
        score=1.0 - ratio,
        wall_clock=wall_clock,
        track_id=track.track_id,
    )


def suppress_by_negative_class(candidate: Detection, co_located: Sequence[Detection],
                               overlap_threshold: float = 0.5) -> bool:
    """True when a dominating negative-class detection vetoes the candidate.

    A false_fire/false_person detection suppresses a fire/person candidate
    when it overlaps it enough and scores strictly higher.
    """
    negative_class = NEGATIVE_FOR.get(candidate.object_class)
    if negative_class is None:
        raise ValueError(f"suppression applies to fire/person, got {candidate.object_class}")
    for other in co_located:
        if other.object_class is not negative_class:
            continue
        if other.confidence <= candidate.confidence:
            continue
        if overlap_area_ratio(candidate.box, other.box) >= overlap_threshold:
            return True
    return False


@dataclass
class _PresenceState:
    streak: int = 0
    last_present_frame: Optional[int] = None
    last_alarm_frame: Optional[int] = None


def judge_presence(
    detections: Sequence[Detection],
    state: dict[ObjectClass, _PresenceState],
    cfg: RuleConfig,
    channel_id: str,
    frame_index: int,
    wall_clock: datetime,
) -> list[IncidentEvent]:
    """Persistence-filtered fire/person alarms with per-class cooldown.

    ``detections`` are this frame's surviving fire/person detections (already
    confidence-floored and suppression-checked). A class must persist for
    ``persistence_frames`` consecutive frames to alarm; re-alarms within
    ``alarm_cooldown_frames`` are swallowed.
    """
    events: list[IncidentEvent] = []
    for object_class, event_type in PRESENCE_EVENT_TYPES.items():
        st = state.setdefault(object_class, _PresenceState())
        present = [d for d in detections if d.object_class is object_class]
        if not present:
            st.streak = 0
            continue
        if st.last_present_frame is not None and st.last_present_frame == frame_index - 1:
            st.streak += 1
        else:
            st.streak = 1
        st.last_present_frame = frame_index

        if st.streak < cfg.persistence_frames:
            continue
        if st.last_alarm_frame is not None and frame_index - st.last_alarm_frame < cfg.alarm_cooldown_frames:
            continue
        st.last_alarm_frame = frame_index
        best = max(present, key=lambda d: d.confidence)
        events.append(
            IncidentEvent(
                event_type=event_type,
                channel_id=channel_id,
                frame_start=frame_index - cfg.persistence_frames + 1,
                frame_end=frame_index,
                evidence_box=best.box,
                score=best.confidence,
                wall_clock=wall_clock,
            )
        )
    return events


class IncidentEngine:
    """Per-channel incident state machine over detections and tracks.

    Sequential per channel, like the tracker. Emitted events are a pure
    function of the detection stream and configuration.
    """

    def __init__(self, channel_id: str, travel_axis: TravelAxis, cfg: RuleConfig | None = None):
        self.channel_id = channel_id
        self.travel_axis = travel_axis
        self.cfg = cfg or RuleConfig()
        self._presence: dict[ObjectClass, _PresenceState] = {}
        self._last_track_alarm: dict[tuple[IncidentType, int], int] = {}

    def process_frame(
        self,
        frame_index: int,
        detections: Sequence[Detection],
        confirmed_tracks: Sequence[Track],
        wall_clock: datetime,
    ) -> list[IncidentEvent]:
        events: list[IncidentEvent] = []

        negatives = [d for d in detections if d.object_class in NEGATIVE_FOR.values()]
        candidates = [
            d
            for d in detections
            if d.object_class in PRESENCE_EVENT_TYPES
            and d.confidence >= self.cfg.confidence_floor.get(d.object_class, 0.0)
        ]
        surviving = [
            d
            for d in candidates
            if not suppress_by_negative_class(d, negatives, self.cfg.suppression_overlap)
        ]
        events.extend(
            judge_presence(surviving, self._presence, self.cfg, self.channel_id, frame_index, wall_clock)
        )

        for track in confirmed_tracks:
            if not track.history or track.history[-1][0] != frame_index:
                continue  # judged only on fresh updates
            window = track.window(self.cfg.judgment_window_frames, frame_index)
            for judge in (self._judge_stoppage, self._judge_wrong_way):
                event = judge(track, window, wall_clock)
                if event is not None:
                    events.append(event)
        return events

    def _cooled_down(self, event_type: IncidentType, track_id: int, frame_index: int) -> bool:
        last = self._last_track_alarm.get((event_type, track_id))
        return last is None or frame_index - last >= self.cfg.alarm_cooldown_frames

    def _judge_stoppage(self, track: Track, window: BoxWindow, wall_clock: datetime):
        if not window or not self._cooled_down(IncidentType.STOPPAGE, track.track_id, window[-1][0]):
            return None
        event = judge_stoppage(track, window, self.cfg, self.channel_id, wall_clock)
        if event is not None:
            self._last_track_alarm[(IncidentType.STOPPAGE, track.track_id)] = event.frame_end
        return event

    def _judge_wrong_way(self, track: Track, window: BoxWindow, wall_clock: datetime):
        if not window or not self._cooled_down(IncidentType.WRONG_WAY, track.track_id, window[-1][0]):
            return None
        event = judge_wrong_way(track, window, self.travel_axis, self.cfg, self.channel_id, wall_clock)
        if event is not None:
            self._last_track_alarm[(IncidentType.WRONG_WAY, track.track_id)] = event.frame_end
        return event
