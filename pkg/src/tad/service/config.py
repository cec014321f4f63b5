"""Pipeline configuration: per-channel travel axes, rule and tracker knobs,
store locations. One JSON document; the TAD_CONFIG env var can supply the
path when the CLI flag is omitted."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from ..geometry import Axis, Direction, TravelAxis
from ..incidents import RuleConfig
from ..tracking import ObjectClass, TrackerConfig


class ConfigError(Exception):
    pass


def _axis_from_dict(doc: dict) -> TravelAxis:
    try:
        return TravelAxis(Axis(doc["axis"]), Direction(doc["positive_direction"]))
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"invalid travel_axis {doc!r}: {exc}") from exc


def _axis_to_dict(axis: TravelAxis) -> dict:
    return {"axis": axis.axis.value, "positive_direction": axis.positive_direction.value}


@dataclass(frozen=True)
class ChannelConfig:
    travel_axis: TravelAxis


@dataclass
class PipelineConfig:
    store_dir: Path
    channels: dict[str, ChannelConfig] = field(default_factory=dict)
    rules: RuleConfig = field(default_factory=RuleConfig)
    tracker: TrackerConfig = field(default_factory=TrackerConfig)
    detection_stride: int = 1
    fps: float = 25.0
    # Fallback axis for channels missing from `channels`; None means strict.
    default_travel_axis: Optional[TravelAxis] = None

    def __post_init__(self) -> None:
        self.store_dir = Path(self.store_dir)
        if self.detection_stride < 1:
            raise ConfigError(f"detection_stride must be >= 1, got {self.detection_stride}")
        if self.fps <= 0:
            raise ConfigError(f"fps must be positive, got {self.fps}")

    @property
    def event_log_path(self) -> Path:
        return self.store_dir / "events.jsonl"

    @property
    def reject_log_path(self) -> Path:
        return self.store_dir / "rejects.log"

    @property
    def manifest_dir(self) -> Path:
        return self.store_dir / "manifests"

    @property
    def model_log_path(self) -> Path:
        return self.store_dir / "models.jsonl"

    @property
    def consumed_path(self) -> Path:
        return self.store_dir / "consumed_verdicts.json"

    def travel_axis_for(self, channel_id: str) -> TravelAxis:
        channel = self.channels.get(channel_id)
        if channel is not None:
            return channel.travel_axis
        if self.default_travel_axis is not None:
            return self.default_travel_axis
        raise ConfigError(
            f"channel {channel_id!r} is not configured and no default_travel_axis is set"
        )

    @classmethod
    def from_dict(cls, doc: dict) -> "PipelineConfig":
        if "store_dir" not in doc:
            raise ConfigError("config needs store_dir")
        channels = {}
        for channel_id, channel_doc in doc.get("channels", {}).items():
            channels[channel_id] = ChannelConfig(travel_axis=_axis_from_dict(channel_doc["travel_axis"]))

        rules_doc = dict(doc.get("rules", {}))
        if "confidence_floor" in rules_doc:
            try:
                rules_doc["confidence_floor"] = {
                    ObjectClass(k): float(v) for k, v in rules_doc["confidence_floor"].items()
                }
            except ValueError as exc:
                raise ConfigError(f"invalid confidence_floor: {exc}") from exc
        try:
            rules = RuleConfig(**rules_doc)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid rules: {exc}") from exc

        tracker_doc = dict(doc.get("tracker", {}))
        for key in ("q_diag", "r_diag", "p0_diag"):
            if key in tracker_doc:
                tracker_doc[key] = tuple(tracker_doc[key])
        try:
            tracker = TrackerConfig(**tracker_doc)
        except TypeError as exc:
            raise ConfigError(f"invalid tracker config: {exc}") from exc

        default_axis = doc.get("default_travel_axis")
        return cls(
            store_dir=Path(doc["store_dir"]),
            channels=channels,
            rules=rules,
            tracker=tracker,
            detection_stride=int(doc.get("detection_stride", 1)),
            fps=float(doc.get("fps", 25.0)),
            default_travel_axis=_axis_from_dict(default_axis) if default_axis else None,
        )

    @classmethod
    def from_file(cls, path: Path | str) -> "PipelineConfig":
        path = Path(path)
        try:
            doc = json.loads(path.read_text())
        except FileNotFoundError as exc:
            raise ConfigError(f"config file not found: {path}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
        return cls.from_dict(doc)

    def to_dict(self) -> dict:
        doc = {
            "store_dir": str(self.store_dir),
            "detection_stride": self.detection_stride,
            "fps": self.fps,
            "channels": {
                channel_id: {"travel_axis": _axis_to_dict(c.travel_axis)}
                for channel_id, c in self.channels.items()
            },
            "rules": {
                "stoppage_overlap_threshold": self.rules.stoppage_overlap_threshold,
                "wrongway_line_ratio_threshold": self.rules.wrongway_line_ratio_threshold,
                "judgment_window_frames": self.rules.judgment_window_frames,
                "alarm_cooldown_frames": self.rules.alarm_cooldown_frames,
                "persistence_frames": self.rules.persistence_frames,
                "confidence_floor": {c.value: v for c, v in self.rules.confidence_floor.items()},
                "direction_dead_band": self.rules.direction_dead_band,
                "suppression_overlap": self.rules.suppression_overlap,
            },
            "tracker": {
                "iou_threshold": self.tracker.iou_threshold,
                "min_hits": self.tracker.min_hits,
                "max_age": self.tracker.max_age,
                "history_len": self.tracker.history_len,
                "s_min": self.tracker.s_min,
            },
        }
        if self.default_travel_axis is not None:
            doc["default_travel_axis"] = _axis_to_dict(self.default_travel_axis)
        return doc
