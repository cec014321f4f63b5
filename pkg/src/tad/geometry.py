"""Box and interval arithmetic for association, stoppage, and wrong-way rules.

All coordinates are continuous pixels, origin top-left, x rightward,
y downward. Everything here is a pure function over immutable values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum


class Axis(str, Enum):
    HORIZONTAL = "horizontal"
    VERTICAL = "vertical"


class Direction(str, Enum):
    INCREASING = "increasing"
    DECREASING = "decreasing"


class Movement(str, Enum):
    """Sign of the displacement along a travel axis."""

    FORWARD = "forward"
    BACKWARD = "backward"
    NONE = "none"


# Centroid jitter below this many pixels does not count as movement.
DEFAULT_DIRECTION_DEAD_BAND = 0.5


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned box with strictly positive area."""

    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self) -> None:
        for v in (self.x_min, self.y_min, self.x_max, self.y_max):
            if not math.isfinite(v):
                raise ValueError(f"box coordinates must be finite, got {self!r}")
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise ValueError(f"box must have positive area, got {self!r}")

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    def center(self) -> tuple[float, float]:
        return (self.x_min + self.x_max) / 2.0, (self.y_min + self.y_max) / 2.0

    def translate(self, dx: float, dy: float) -> "BoundingBox":
        return BoundingBox(self.x_min + dx, self.y_min + dy, self.x_max + dx, self.y_max + dy)

    def as_list(self) -> list[float]:
        return [self.x_min, self.y_min, self.x_max, self.y_max]

    @classmethod
    def from_list(cls, xyxy) -> "BoundingBox":
        if len(xyxy) != 4:
            raise ValueError(f"box needs 4 coordinates, got {len(xyxy)}")
        return cls(float(xyxy[0]), float(xyxy[1]), float(xyxy[2]), float(xyxy[3]))


@dataclass(frozen=True)
class TravelAxis:
    """Permitted traffic direction along one image axis, per channel."""

    axis: Axis
    positive_direction: Direction

    def __post_init__(self) -> None:
        # Tolerate raw strings from config files.
        object.__setattr__(self, "axis", Axis(self.axis))
        object.__setattr__(self, "positive_direction", Direction(self.positive_direction))


def area(b: BoundingBox) -> float:
    """Box area in pixels squared."""
    return b.width * b.height


def intersection_area(a: BoundingBox, b: BoundingBox) -> float:
    w = min(a.x_max, b.x_max) - max(a.x_min, b.x_min)
    h = min(a.y_max, b.y_max) - max(a.y_min, b.y_min)
    if w <= 0.0 or h <= 0.0:
        return 0.0
    return w * h


def overlap_area_ratio(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection over union of two boxes; 0 when disjoint, 1 when identical."""
    inter = intersection_area(a, b)
    if inter == 0.0:
        return 0.0
    union = area(a) + area(b) - inter
    return inter / union


def _project(b: BoundingBox, ax: TravelAxis) -> tuple[float, float]:
    if ax.axis is Axis.HORIZONTAL:
        return b.x_min, b.x_max
    return b.y_min, b.y_max


def overlapped_line_length_ratio(prev: BoundingBox, curr: BoundingBox, ax: TravelAxis) -> float:
    """1-D overlap of the two boxes projected onto the travel axis.

    Normalized by the length of the *previous* box's projection, so the
    ratio reads as "fraction of the prior position still occupied".
    """
    p_lo, p_hi = _project(prev, ax)
    c_lo, c_hi = _project(curr, ax)
    inter = min(p_hi, c_hi) - max(p_lo, c_lo)
    if inter <= 0.0:
        return 0.0
    return inter / (p_hi - p_lo)


def displacement_sign(
    prev: BoundingBox,
    curr: BoundingBox,
    ax: TravelAxis,
    dead_band: float = DEFAULT_DIRECTION_DEAD_BAND,
) -> Movement:
    """Direction of centroid travel along the axis, relative to the permitted one.

    Displacements within ``dead_band`` pixels are reported as NONE so that
    detector jitter does not flip direction judgments.
    """
    (px, py) = prev.center()
    (cx, cy) = curr.center()
    delta = (cx - px) if ax.axis is Axis.HORIZONTAL else (cy - py)
    if ax.positive_direction is Direction.DECREASING:
        delta = -delta
    if abs(delta) <= dead_band:
        return Movement.NONE
    return Movement.FORWARD if delta > 0 else Movement.BACKWARD
