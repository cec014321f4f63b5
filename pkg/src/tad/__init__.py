"""Tunnel CCTV incident detection with a self-enhancing FP curation loop.

Pipeline: detections -> per-channel SORT tracking -> incident rules
(fire / person / stoppage / wrong-way) -> event store -> human (or oracle)
triage -> negative-class training sets -> retrained detector with fewer
false alarms.
"""

__version__ = "0.1.0"

from .geometry import (
    Axis,
    BoundingBox,
    Direction,
    Movement,
    TravelAxis,
    area,
    displacement_sign,
    overlap_area_ratio,
    overlapped_line_length_ratio,
)
from .tracking import ChannelTracker, Detection, ObjectClass, Track, TrackerConfig
from .incidents import IncidentEngine, IncidentEvent, IncidentType, RuleConfig

__all__ = [
    "Axis",
    "BoundingBox",
    "Direction",
    "Movement",
    "TravelAxis",
    "area",
    "displacement_sign",
    "overlap_area_ratio",
    "overlapped_line_length_ratio",
    "ChannelTracker",
    "Detection",
    "ObjectClass",
    "Track",
    "TrackerConfig",
    "IncidentEngine",
    "IncidentEvent",
    "IncidentType",
    "RuleConfig",
]
