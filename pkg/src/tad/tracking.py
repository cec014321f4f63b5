"""Per-channel multi-object tracker in the classic SORT mold.

Constant-velocity Kalman prediction on an (u, v, s, r) box parameterization,
optimal IoU assignment, and hit/age track lifecycle. One tracker instance per
CCTV channel; frames must arrive in increasing frame_index order. Distinct
channels share no state and may run in parallel.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.optimize import linear_sum_assignment

from .geometry import BoundingBox, overlap_area_ratio


class ObjectClass(str, Enum):
    CAR = "car"
    PERSON = "person"
    FIRE = "fire"
    FALSE_FIRE = "false_fire"
    FALSE_PERSON = "false_person"


POSITIVE_CLASSES = (ObjectClass.CAR, ObjectClass.PERSON, ObjectClass.FIRE)
NEGATIVE_CLASSES = (ObjectClass.FALSE_FIRE, ObjectClass.FALSE_PERSON)

# Which negative class absorbs which alarm-raising class.
NEGATIVE_FOR = {ObjectClass.FIRE: ObjectClass.FALSE_FIRE, ObjectClass.PERSON: ObjectClass.FALSE_PERSON}


class TrackStatus(str, Enum):
    TENTATIVE = "tentative"
    CONFIRMED = "confirmed"
    DEAD = "dead"


class TrackingError(Exception):
    pass


class FrameOrderError(TrackingError):
    """Raised when a frame arrives at or before the last processed frame_index."""


class NumericalDegeneracyError(TrackingError):
    """Raised when the innovation covariance stays singular after regularization."""


@dataclass(frozen=True)
class Detection:
    box: BoundingBox
    object_class: ObjectClass
    confidence: float
    frame_index: int
    channel_id: str

    def __post_init__(self) -> None:
        object.__setattr__(self, "object_class", ObjectClass(self.object_class))
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence must be in [0,1], got {self.confidence}")
        if self.frame_index < 0:
            raise ValueError(f"frame_index must be non-negative, got {self.frame_index}")


@dataclass(frozen=True)
class TrackerConfig:
    iou_threshold: float = 0.3
    min_hits: int = 3
    max_age: int = 5
    history_len: int = 150
    # Minimum box scale (area, px^2) the predictor may collapse to.
    s_min: float = 1.0
    # Diagonals of the process / measurement noise and initial covariance.
    # Position noise small, scale/ratio noise larger, unobserved velocities
    # start highly uncertain -- the conventional SORT magnitudes.
    q_diag: tuple[float, ...] = (1.0, 1.0, 1.0, 1.0, 0.01, 0.01, 1e-4)
    r_diag: tuple[float, ...] = (1.0, 1.0, 10.0, 10.0)
    p0_diag: tuple[float, ...] = (10.0, 10.0, 10.0, 10.0, 1e4, 1e4, 1e4)


@dataclass
class KalmanState:
    """Mean (u, v, s, r, du, dv, ds) and 7x7 covariance.

    u, v are the box center, s its area, r its aspect ratio (held constant by
    the motion model: r carries no velocity term).
    """

    mean: np.ndarray
    covariance: np.ndarray


# Constant-velocity transition and the box-measurement projection.
_F = np.eye(7)
_F[0, 4] = _F[1, 5] = _F[2, 6] = 1.0
_H = np.zeros((4, 7))
_H[0, 0] = _H[1, 1] = _H[2, 2] = _H[3, 3] = 1.0

_INNOVATION_EPS = 1e-9


def box_to_observation(box: BoundingBox) -> np.ndarray:
    u, v = box.center()
    return np.array([u, v, box.width * box.height, box.width / box.height])


def observation_to_box(z: np.ndarray) -> BoundingBox:
    u, v, s, r = float(z[0]), float(z[1]), float(z[2]), float(z[3])
    w = np.sqrt(s * r)
    h = s / w
    return BoundingBox(u - w / 2.0, v - h / 2.0, u + w / 2.0, v + h / 2.0)


def initial_state(box: BoundingBox, cfg: TrackerConfig = TrackerConfig()) -> KalmanState:
    mean = np.zeros(7)
    mean[:4] = box_to_observation(box)
    return KalmanState(mean=mean, covariance=np.diag(cfg.p0_diag).astype(float))


def kalman_predict(state: KalmanState, cfg: TrackerConfig = TrackerConfig()) -> KalmanState:
    """Advance one frame under the constant-velocity model and add process noise."""
    mean = _F @ state.mean
    if mean[2] <= 0.0:
        mean[2] = cfg.s_min
        mean[6] = 0.0
    cov = _F @ state.covariance @ _F.T + np.diag(cfg.q_diag)
    cov = (cov + cov.T) / 2.0
    return KalmanState(mean=mean, covariance=cov)


def kalman_update(
    state: KalmanState, observation: BoundingBox, cfg: TrackerConfig = TrackerConfig()
) -> KalmanState:
    """Correct the state with a measured box (standard linear Kalman update).

    Uses the Joseph form so the posterior covariance stays symmetric PSD. A
    singular innovation covariance is retried once with a small ridge before
    raising NumericalDegeneracyError.
    """
    z = box_to_observation(observation)
    innovation = z - _H @ state.mean
    pht = state.covariance @ _H.T
    s_mat = _H @ pht + np.diag(cfg.r_diag)
    try:
        gain = np.linalg.solve(s_mat.T, pht.T).T
    except np.linalg.LinAlgError:
        try:
            gain = np.linalg.solve((s_mat + _INNOVATION_EPS * np.eye(4)).T, pht.T).T
        except np.linalg.LinAlgError as exc:
            raise NumericalDegeneracyError("innovation covariance is singular") from exc
    mean = state.mean + gain @ innovation
    ikh = np.eye(7) - gain @ _H
    cov = ikh @ state.covariance @ ikh.T + gain @ np.diag(cfg.r_diag) @ gain.T
    cov = (cov + cov.T) / 2.0
    return KalmanState(mean=mean, covariance=cov)


def associate(
    track_boxes: list[BoundingBox],
    detection_boxes: list[BoundingBox],
    iou_threshold: float = 0.3,
) -> tuple[list[tuple[int, int]], list[int], list[int]]:
    """One-to-one matching of predicted track boxes to detections.

    Maximizes the total IoU over the assignment, counting pairs below
    ``iou_threshold`` as worthless; such pairs are never reported as matches
    even when the assignment selects them.
    """
    if not 0.0 <= iou_threshold <= 1.0:
        raise ValueError(f"iou_threshold must be in [0,1], got {iou_threshold}")
    if not track_boxes or not detection_boxes:
        return [], list(range(len(track_boxes))), list(range(len(detection_boxes)))

    iou = np.zeros((len(track_boxes), len(detection_boxes)))
    for t, tb in enumerate(track_boxes):
        for d, db in enumerate(detection_boxes):
            iou[t, d] = overlap_area_ratio(tb, db)

    scores = np.where(iou >= iou_threshold, iou, 0.0)
    rows, cols = linear_sum_assignment(scores, maximize=True)

    matches = [(int(t), int(d)) for t, d in zip(rows, cols) if iou[t, d] >= iou_threshold]
    matched_tracks = {t for t, _ in matches}
    matched_dets = {d for _, d in matches}
    unmatched_tracks = [t for t in range(len(track_boxes)) if t not in matched_tracks]
    unmatched_dets = [d for d in range(len(detection_boxes)) if d not in matched_dets]
    return matches, unmatched_tracks, unmatched_dets


@dataclass
class Track:
    track_id: int
    state: KalmanState
    object_class: ObjectClass
    hits: int = 1
    age_since_update: int = 0
    status: TrackStatus = TrackStatus.TENTATIVE
    history: deque = field(default_factory=deque)  # of (frame_index, BoundingBox)

    def current_box(self) -> BoundingBox:
        return observation_to_box(self.state.mean[:4])

    def window(self, frames: int, end_frame: int) -> list[tuple[int, BoundingBox]]:
        """History entries within the last ``frames`` frames ending at ``end_frame``."""
        start = end_frame - frames + 1
        return [(f, b) for f, b in self.history if f >= start]


class ChannelTracker:
    """Tracks car detections for one channel; frames must arrive in order."""

    def __init__(self, channel_id: str, cfg: TrackerConfig | None = None):
        self.channel_id = channel_id
        self.cfg = cfg or TrackerConfig()
        self.tracks: list[Track] = []
        self.last_frame_index: int | None = None
        self._next_id = 1

    @property
    def tracks_created(self) -> int:
        return self._next_id - 1

    def step(self, frame_index: int, detections: list[Detection]) -> list[Track]:
        """Predict, associate, update; returns the confirmed tracks.

        Only car detections participate; other classes are ignored here and
        judged directly by the incident rules. Returned Track objects are the
        live ones -- callers must treat them as read-only.
        """
        if self.last_frame_index is not None and frame_index <= self.last_frame_index:
            raise FrameOrderError(
                f"channel {self.channel_id}: frame {frame_index} arrived after "
                f"frame {self.last_frame_index}"
            )
        self.last_frame_index = frame_index

        cars = [d for d in detections if d.object_class is ObjectClass.CAR]
        for det in cars:
            if det.channel_id != self.channel_id:
                raise TrackingError(
                    f"detection for channel {det.channel_id} fed to tracker {self.channel_id}"
                )

        for track in self.tracks:
            track.state = kalman_predict(track.state, self.cfg)
            track.age_since_update += 1

        predicted = [t.current_box() for t in self.tracks]
        det_boxes = [d.box for d in cars]
        matches, _, unmatched_dets = associate(predicted, det_boxes, self.cfg.iou_threshold)

        for t_idx, d_idx in matches:
            track = self.tracks[t_idx]
            track.state = kalman_update(track.state, det_boxes[d_idx], self.cfg)
            track.hits += 1
            track.age_since_update = 0
            if track.hits >= self.cfg.min_hits:
                track.status = TrackStatus.CONFIRMED
            track.history.append((frame_index, track.current_box()))

        for d_idx in unmatched_dets:
            state = initial_state(det_boxes[d_idx], self.cfg)
            track = Track(
                track_id=self._next_id,
                state=state,
                object_class=ObjectClass.CAR,
                history=deque(maxlen=self.cfg.history_len),
            )
            if self.cfg.min_hits <= 1:
                track.status = TrackStatus.CONFIRMED
            track.history.append((frame_index, track.current_box()))
            self._next_id += 1
            self.tracks.append(track)

        survivors = []
        for track in self.tracks:
            if track.age_since_update > self.cfg.max_age:
                track.status = TrackStatus.DEAD
            else:
                survivors.append(track)
        self.tracks = survivors

        return [t for t in self.tracks if t.status is TrackStatus.CONFIRMED]
