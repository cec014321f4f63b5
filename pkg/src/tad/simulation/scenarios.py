"""Scripted tunnel scenarios rendered to small grayscale rasters.

Entities are flat rectangles over a flat noisy background; the visual
phenomenology that matters is relative: cars are mid-gray and wide, persons
small and tall, fires large/bright/flickery. The two artifact kinds render
like their look-alikes (portal glare like a fire, dark smears like a person)
but never appear in ground truth.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Optional

import numpy as np

from ..geometry import BoundingBox
from ..evaluation import GroundTruthFrame
from ..tracking import ObjectClass


class ScenarioError(Exception):
    pass


BACKGROUND_LEVEL = 40.0
BACKGROUND_NOISE = 3.0

# kind -> (truth class, default size, default intensity, default texture sigma)
_KIND_DEFAULTS = {
    "car": (ObjectClass.CAR, (26.0, 14.0), 130.0, 3.0),
    "person": (ObjectClass.PERSON, (7.0, 16.0), 95.0, 3.0),
    "fire": (ObjectClass.FIRE, (36.0, 30.0), 200.0, 35.0),
    "glare_artifact": (None, (30.0, 22.0), 240.0, 4.0),
    "dark_smear": (None, (7.0, 16.0), 15.0, 3.0),
}

MOTIONS = ("linear", "stop", "reverse")


@dataclass(frozen=True)
class EntitySpec:
    kind: str
    center: tuple[float, float]
    size: tuple[float, float]
    velocity: tuple[float, float] = (0.0, 0.0)
    motion: str = "linear"
    phase_frame: Optional[int] = None  # frame at which stop/reverse kicks in
    intensity: Optional[float] = None
    texture: Optional[float] = None
    jitter: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in _KIND_DEFAULTS:
            raise ScenarioError(f"unknown entity kind {self.kind!r}")
        if self.motion not in MOTIONS:
            raise ScenarioError(f"unknown motion {self.motion!r}")
        if self.motion != "linear" and self.phase_frame is None:
            raise ScenarioError(f"{self.motion!r} motion needs phase_frame")

    @property
    def truth_class(self) -> Optional[ObjectClass]:
        return _KIND_DEFAULTS[self.kind][0]

    def resolved_intensity(self) -> float:
        return self.intensity if self.intensity is not None else _KIND_DEFAULTS[self.kind][2]

    def resolved_texture(self) -> float:
        return self.texture if self.texture is not None else _KIND_DEFAULTS[self.kind][3]

    def to_dict(self) -> dict:
        doc = {
            "kind": self.kind,
            "center": list(self.center),
            "size": list(self.size),
            "velocity": list(self.velocity),
            "motion": self.motion,
            "jitter": self.jitter,
        }
        if self.phase_frame is not None:
            doc["phase_frame"] = self.phase_frame
        if self.intensity is not None:
            doc["intensity"] = self.intensity
        if self.texture is not None:
            doc["texture"] = self.texture
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "EntitySpec":
        return cls(
            kind=doc["kind"],
            center=tuple(doc["center"]),
            size=tuple(doc["size"]),
            velocity=tuple(doc.get("velocity", (0.0, 0.0))),
            motion=doc.get("motion", "linear"),
            phase_frame=doc.get("phase_frame"),
            intensity=doc.get("intensity"),
            texture=doc.get("texture"),
            jitter=doc.get("jitter", 0.0),
        )


def car(center, velocity=(0.0, 0.0), size=(26.0, 14.0), motion="linear",
        phase_frame=None, jitter=0.3, intensity=None) -> EntitySpec:
    return EntitySpec("car", center, size, velocity, motion, phase_frame,
                      intensity=intensity, jitter=jitter)


def person(center, size=(7.0, 16.0), velocity=(0.0, 0.0), jitter=0.3, intensity=None) -> EntitySpec:
    return EntitySpec("person", center, size, velocity, jitter=jitter, intensity=intensity)


def fire(center, size=(36.0, 30.0), jitter=0.3, intensity=None) -> EntitySpec:
    return EntitySpec("fire", center, size, jitter=jitter, intensity=intensity)


def glare_artifact(center, size=(30.0, 22.0), jitter=0.3, intensity=None) -> EntitySpec:
    return EntitySpec("glare_artifact", center, size, jitter=jitter, intensity=intensity)


def dark_smear(center, size=(7.0, 16.0), velocity=(0.0, 0.0), jitter=0.3, intensity=None) -> EntitySpec:
    return EntitySpec("dark_smear", center, size, velocity, jitter=jitter, intensity=intensity)


@dataclass(frozen=True)
class ScenarioSpec:
    channel_id: str
    frames: int
    entities: tuple[EntitySpec, ...]
    seed: int
    frame_size: tuple[int, int] = (160, 120)  # (width, height)

    def __post_init__(self) -> None:
        object.__setattr__(self, "entities", tuple(self.entities))
        if self.frames <= 0:
            raise ScenarioError("scenario needs at least one frame")

    def to_dict(self) -> dict:
        return {
            "channel_id": self.channel_id,
            "frames": self.frames,
            "frame_size": list(self.frame_size),
            "seed": self.seed,
            "entities": [e.to_dict() for e in self.entities],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ScenarioSpec":
        return cls(
            channel_id=doc["channel_id"],
            frames=int(doc["frames"]),
            entities=tuple(EntitySpec.from_dict(e) for e in doc["entities"]),
            seed=int(doc["seed"]),
            frame_size=tuple(doc.get("frame_size", (160, 120))),
        )


@dataclass(frozen=True)
class PlacedEntity:
    kind: str
    box: BoundingBox
    truth_class: Optional[ObjectClass]
    intensity: float
    texture: float


def _center_at(entity: EntitySpec, frame_index: int) -> tuple[float, float]:
    cx, cy = entity.center
    vx, vy = entity.velocity
    t = frame_index
    if entity.motion == "linear":
        return cx + vx * t, cy + vy * t
    phase = entity.phase_frame
    if entity.motion == "stop":
        t_eff = min(t, phase)
        return cx + vx * t_eff, cy + vy * t_eff
    # reverse: forward until phase, then back the way it came
    if t <= phase:
        return cx + vx * t, cy + vy * t
    back = t - phase
    return cx + vx * phase - vx * back, cy + vy * phase - vy * back


def script_scenario(spec: ScenarioSpec) -> list[list[PlacedEntity]]:
    """Per-frame entity placements; raises if any entity leaves the frame."""
    width, height = spec.frame_size
    jitter_rng = np.random.default_rng([spec.seed, 1])
    frames: list[list[PlacedEntity]] = []
    for t in range(spec.frames):
        placed: list[PlacedEntity] = []
        for idx, entity in enumerate(spec.entities):
            cx, cy = _center_at(entity, t)
            if entity.jitter > 0.0:
                jx, jy = jitter_rng.uniform(-entity.jitter, entity.jitter, size=2)
                cx, cy = cx + jx, cy + jy
            w, h = entity.size
            box = BoundingBox(cx - w / 2.0, cy - h / 2.0, cx + w / 2.0, cy + h / 2.0)
            if box.x_min < 0 or box.y_min < 0 or box.x_max > width or box.y_max > height:
                raise ScenarioError(
                    f"entity {idx} ({entity.kind}) leaves frame bounds at frame {t}: {box}"
                )
            placed.append(
                PlacedEntity(
                    kind=entity.kind,
                    box=box,
                    truth_class=entity.truth_class,
                    intensity=entity.resolved_intensity(),
                    texture=entity.resolved_texture(),
                )
            )
        frames.append(placed)
    return frames


def _truth_frame(spec: ScenarioSpec, frame_index: int, placed: list[PlacedEntity]) -> GroundTruthFrame:
    return GroundTruthFrame(
        frame_index=frame_index,
        channel_id=spec.channel_id,
        objects=tuple((p.box, p.truth_class) for p in placed if p.truth_class is not None),
    )


def render_frame(spec: ScenarioSpec, frame_index: int, placed: list[PlacedEntity]) -> np.ndarray:
    width, height = spec.frame_size
    rng = np.random.default_rng([spec.seed, 2, frame_index])
    canvas = np.full((height, width), BACKGROUND_LEVEL) + rng.normal(
        0.0, BACKGROUND_NOISE, size=(height, width)
    )
    for p in placed:
        x0, y0 = int(round(p.box.x_min)), int(round(p.box.y_min))
        x1, y1 = int(round(p.box.x_max)), int(round(p.box.y_max))
        x0, y0 = max(x0, 0), max(y0, 0)
        x1, y1 = min(x1, width), min(y1, height)
        if x1 <= x0 or y1 <= y0:
            continue
        canvas[y0:y1, x0:x1] = p.intensity + rng.normal(0.0, p.texture, size=(y1 - y0, x1 - x0))
    return np.clip(canvas, 0, 255).astype(np.uint8)


def generate_scenario(spec: ScenarioSpec) -> Iterator[tuple[np.ndarray, GroundTruthFrame]]:
    """Yield (raster, ground truth) per frame; bit-identical for equal seeds.

    Truth carries only car/person/fire objects; artifacts exist in pixels
    alone.
    """
    script = script_scenario(spec)
    for t, placed in enumerate(script):
        yield render_frame(spec, t, placed), _truth_frame(spec, t, placed)


def truth_stream(spec: ScenarioSpec) -> list[GroundTruthFrame]:
    """Ground truth only, skipping rasterization (handy for tracker tests)."""
    return [_truth_frame(spec, t, placed) for t, placed in enumerate(script_scenario(spec))]
