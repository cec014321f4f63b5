"""Trainable toy detector: nearest-prototype classification of salient regions.

Candidate regions come from a saliency scan of the frame against its
background level; each candidate's hand-crafted window features are matched
to per-class prototype vectors learned from a dataset manifest. Negative
classes trained from collected FPs claim the artifact regions that would
otherwise score as fire/person. Everything is deterministic: no RNG, no
iteration-order dependence.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
from scipy import ndimage

from ..curation import DatasetManifest
from ..geometry import BoundingBox
from ..tracking import Detection, ObjectClass

logger = logging.getLogger(__name__)

FEATURE_NAMES = ("mean_intensity", "aspect", "extent", "contrast", "texture")


class DetectorError(Exception):
    pass


@dataclass(frozen=True)
class DetectorConfig:
    frame_size: tuple[int, int] = (160, 120)  # (width, height)
    # Pixels deviating from the background level by more than this are salient.
    saliency_threshold: float = 18.0
    min_region_px: int = 40
    # Confidence = exp(-gamma * feature distance to the winning prototype).
    classify_gamma: float = 2.0
    default_threshold: float = 0.35
    # Feature-space radius for merging training examples into one prototype.
    cluster_radius: float = 0.15


def window_features(frame: np.ndarray, box: BoundingBox) -> np.ndarray:
    """Five O(1)-scaled features of one window: mean intensity, aspect ratio,
    relative extent, contrast against a surrounding ring, and texture."""
    height, width = frame.shape
    x0, y0 = max(int(round(box.x_min)), 0), max(int(round(box.y_min)), 0)
    x1, y1 = min(int(round(box.x_max)), width), min(int(round(box.y_max)), height)
    x1, y1 = max(x1, x0 + 1), max(y1, y0 + 1)
    if x0 >= width or y0 >= height:
        raise DetectorError(f"window {box} lies outside the frame")
    region = frame[y0:y1, x0:x1].astype(float)

    ring = 3
    rx0, ry0 = max(x0 - ring, 0), max(y0 - ring, 0)
    rx1, ry1 = min(x1 + ring, width), min(y1 + ring, height)
    surround = frame[ry0:ry1, rx0:rx1].astype(float)
    ring_sum = surround.sum() - region.sum()
    ring_px = surround.size - region.size
    ring_mean = ring_sum / ring_px if ring_px > 0 else region.mean()

    mean_intensity = region.mean() / 255.0
    aspect = min(box.width / box.height, 4.0) / 4.0
    extent = min(math.sqrt((box.width * box.height) / (width * height)) * 2.0, 1.0)
    contrast = ((region.mean() - ring_mean) / 255.0 + 1.0) / 2.0
    texture = min(region.std() / 128.0, 1.0)
    return np.array([mean_intensity, aspect, extent, contrast, texture])


@dataclass
class ToyDetectorModel:
    # class -> (k, 5) array of prototype vectors (leader-clustered exemplars)
    prototypes: dict[ObjectClass, np.ndarray]
    thresholds: dict[ObjectClass, float]
    trained_on: str
    config: DetectorConfig = field(default_factory=DetectorConfig)

    def __post_init__(self) -> None:
        for cls, protos in self.prototypes.items():
            if not np.all(np.isfinite(protos)):
                raise DetectorError(f"non-finite prototype for class {cls}")
        for cls, threshold in self.thresholds.items():
            if not 0.0 < threshold < 1.0:
                raise DetectorError(f"threshold for {cls} must be in (0,1), got {threshold}")

    def classify(self, features: np.ndarray) -> tuple[ObjectClass | None, float]:
        """Nearest prototype over all classes; confidence decays with distance."""
        best_cls, best_dist = None, math.inf
        for cls in ObjectClass:  # fixed order keeps ties deterministic
            protos = self.prototypes.get(cls)
            if protos is None or len(protos) == 0:
                continue
            dist = float(np.min(np.linalg.norm(protos - features, axis=1)))
            if dist < best_dist:
                best_cls, best_dist = cls, dist
        if best_cls is None:
            return None, 0.0
        return best_cls, math.exp(-self.config.classify_gamma * best_dist)


def _leader_clusters(features: list[np.ndarray], radius: float) -> np.ndarray:
    """Greedy leader clustering in input order; returns member means."""
    leaders: list[np.ndarray] = []
    members: list[list[np.ndarray]] = []
    for feat in features:
        best, best_dist = -1, math.inf
        for i, leader in enumerate(leaders):
            dist = float(np.linalg.norm(feat - leader))
            if dist < best_dist:
                best, best_dist = i, dist
        if best >= 0 and best_dist <= radius:
            members[best].append(feat)
        else:
            leaders.append(feat)
            members.append([feat])
    return np.array([np.mean(group, axis=0) for group in members])


def toy_train(
    manifest: DatasetManifest,
    images: Mapping[str, np.ndarray],
    cfg: DetectorConfig | None = None,
) -> ToyDetectorModel:
    """Fit per-class prototypes from a manifest's labeled boxes.

    Negative-class objects (collected FP boxes) produce prototypes in the
    same feature space, so artifact regions resolve to them instead of to
    fire/person at inference. Classes with no usable objects are skipped
    with a notice. Retraining on an identical manifest yields an identical
    model.
    """
    cfg = cfg or DetectorConfig()
    per_class: dict[ObjectClass, list[np.ndarray]] = {}
    for entry in manifest.entries:
        frame = images[entry.image]
        for obj in entry.objects:
            per_class.setdefault(obj.object_class, []).append(window_features(frame, obj.box))

    prototypes: dict[ObjectClass, np.ndarray] = {}
    for cls in ObjectClass:
        feats = per_class.get(cls, [])
        if not feats:
            if any(cls is o.object_class for e in manifest.entries for o in e.objects):
                logger.info("toy_train: class %s has no usable objects, skipped", cls.value)
            continue
        prototypes[cls] = _leader_clusters(feats, cfg.cluster_radius)
    thresholds = {cls: cfg.default_threshold for cls in prototypes}
    return ToyDetectorModel(
        prototypes=prototypes, thresholds=thresholds, trained_on=manifest.name, config=cfg
    )


def _propose_regions(frame: np.ndarray, cfg: DetectorConfig) -> list[BoundingBox]:
    """Salient-region candidates: pixels far from the background level,
    merged into connected components and tightly boxed."""
    background = float(np.median(frame))
    mask = np.abs(frame.astype(float) - background) > cfg.saliency_threshold
    labels, count = ndimage.label(mask, structure=np.ones((3, 3), dtype=int))
    boxes: list[BoundingBox] = []
    for sl in ndimage.find_objects(labels):
        if sl is None:
            continue
        region_px = int(mask[sl].sum())
        if region_px < cfg.min_region_px:
            continue
        y_sl, x_sl = sl
        boxes.append(BoundingBox(float(x_sl.start), float(y_sl.start), float(x_sl.stop), float(y_sl.stop)))
    return boxes


def toy_infer(
    model: ToyDetectorModel,
    frame: np.ndarray,
    channel_id: str = "sim",
    frame_index: int = 0,
) -> list[Detection]:
    """Detect objects (negative classes included) in one raster frame."""
    cfg = model.config
    width, height = cfg.frame_size
    if frame.shape != (height, width):
        raise DetectorError(
            f"frame shape {frame.shape} does not match configured {(height, width)}"
        )
    detections: list[Detection] = []
    for box in _propose_regions(frame, cfg):
        cls, confidence = model.classify(window_features(frame, box))
        if cls is None or confidence < model.thresholds.get(cls, cfg.default_threshold):
            continue
        detections.append(
            Detection(
                box=box,
                object_class=cls,
                confidence=min(confidence, 1.0),
                frame_index=frame_index,
                channel_id=channel_id,
            )
        )
    return detections
