"""Dataset curation: field FP events become negative-class training data.

Review verdicts on fire/person events relabel the recorded evidence boxes as
false_fire/false_person manifest objects, compositions stack manifests into
training sets, and loop_round drives one collect -> compose -> train ->
evaluate cycle against a pluggable training hook.
"""

from __future__ import annotations

import json
import logging
import subprocess
import tempfile
import threading
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Mapping, Optional, Protocol, Sequence

from .geometry import BoundingBox
from .incidents import IncidentType
from .tracking import NEGATIVE_CLASSES, ObjectClass

logger = logging.getLogger(__name__)


class CurationError(Exception):
    pass


class UnknownEventError(CurationError):
    def __init__(self, event_ids: Sequence[str]):
        self.event_ids = list(event_ids)
        super().__init__(f"verdicts reference unknown events: {', '.join(self.event_ids)}")


class UnresolvedManifestError(CurationError):
    def __init__(self, names: Sequence[str]):
        self.names = list(names)
        super().__init__(f"composition references unregistered manifests: {', '.join(self.names)}")


class Provenance(str, Enum):
    LABELED = "labeled"
    FP_COLLECTED = "fp_collected"


class VerdictKind(str, Enum):
    TRUE_POSITIVE = "true_positive"
    FALSE_POSITIVE = "false_positive"


@dataclass(frozen=True)
class LabeledObject:
    box: BoundingBox
    object_class: ObjectClass

    def __post_init__(self) -> None:
        object.__setattr__(self, "object_class", ObjectClass(self.object_class))


@dataclass(frozen=True)
class ManifestEntry:
    image: str
    objects: tuple[LabeledObject, ...]


@dataclass(frozen=True)
class DatasetManifest:
    name: str
    entries: tuple[ManifestEntry, ...]
    provenance: Provenance
    created: datetime

    def __post_init__(self) -> None:
        object.__setattr__(self, "provenance", Provenance(self.provenance))
        object.__setattr__(self, "entries", tuple(self.entries))
        if self.provenance is Provenance.FP_COLLECTED:
            bad = {
                obj.object_class
                for entry in self.entries
                for obj in entry.objects
                if obj.object_class not in NEGATIVE_CLASSES
            }
            if bad:
                raise ValueError(
                    f"fp_collected manifest {self.name!r} contains positive classes: "
                    f"{sorted(c.value for c in bad)}"
                )

    def class_counts(self) -> dict[ObjectClass, int]:
        counts = {cls: 0 for cls in ObjectClass}
        for entry in self.entries:
            for obj in entry.objects:
                counts[obj.object_class] += 1
        return counts

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "provenance": self.provenance.value,
            "created": self.created.isoformat(),
            "entries": [
                {
                    "image": e.image,
                    "objects": [
                        {"box": obj.box.as_list(), "class": obj.object_class.value}
                        for obj in e.objects
                    ],
                }
                for e in self.entries
            ],
        }

    @classmethod
    def from_dict(cls, doc: Mapping) -> "DatasetManifest":
        entries = tuple(
            ManifestEntry(
                image=e["image"],
                objects=tuple(
                    LabeledObject(BoundingBox.from_list(o["box"]), ObjectClass(o["class"]))
                    for o in e["objects"]
                ),
            )
            for e in doc["entries"]
        )
        return cls(
            name=doc["name"],
            entries=entries,
            provenance=Provenance(doc["provenance"]),
            created=datetime.fromisoformat(doc["created"]),
        )


@dataclass(frozen=True)
class ModelComposition:
    model_name: str
    manifests: tuple[str, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "manifests", tuple(self.manifests))
        if not self.manifests:
            raise ValueError("a composition needs at least one manifest")
        if len(set(self.manifests)) != len(self.manifests):
            raise ValueError(f"composition {self.model_name!r} lists duplicate manifests")


@dataclass(frozen=True)
class ReviewVerdict:
    event_id: str
    verdict: VerdictKind
    reviewer: str
    reviewed_at: datetime
    negative_class: Optional[ObjectClass] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "verdict", VerdictKind(self.verdict))
        if self.negative_class is not None:
            negative = ObjectClass(self.negative_class)
            if negative not in NEGATIVE_CLASSES:
                raise ValueError(f"negative_class must be a negative class, got {negative}")
            object.__setattr__(self, "negative_class", negative)
        if self.verdict is VerdictKind.TRUE_POSITIVE and self.negative_class is not None:
            raise ValueError("true_positive verdicts carry no negative_class")


# What a verdict must say about each alarm type it can mark false.
_REQUIRED_NEGATIVE = {
    IncidentType.FIRE: ObjectClass.FALSE_FIRE,
    IncidentType.PERSON: ObjectClass.FALSE_PERSON,
}


def check_verdict_against_event(verdict: ReviewVerdict, event_type: IncidentType) -> None:
    """Raise CurationError unless the verdict is legal for this event type."""
    if verdict.verdict is VerdictKind.TRUE_POSITIVE:
        return
    required = _REQUIRED_NEGATIVE.get(event_type)
    if required is None:
        if verdict.negative_class is not None:
            raise CurationError(
                f"{event_type.value} events take no negative_class, got "
                f"{verdict.negative_class.value} on {verdict.event_id}"
            )
        return
    if verdict.negative_class is None:
        raise CurationError(
            f"false_positive verdict on {event_type.value} event {verdict.event_id} "
            f"requires negative_class={required.value}"
        )
    if verdict.negative_class is not required:
        raise CurationError(
            f"negative_class {verdict.negative_class.value} does not match "
            f"{event_type.value} event {verdict.event_id} (expected {required.value})"
        )


@dataclass(frozen=True)
class EventRecord:
    """The slice of a stored incident event that curation needs."""

    event_id: str
    event_type: IncidentType
    evidence_box: BoundingBox
    image_ref: Optional[str] = None


def collect_fp(
    events: Mapping[str, EventRecord],
    verdicts: Sequence[ReviewVerdict],
    name: str,
    created: Optional[datetime] = None,
) -> DatasetManifest:
    """Build an fp_collected manifest from false-positive verdicts.

    Each FP verdict on a fire/person event contributes one entry: the
    event's still image with the detector's own evidence box relabeled to
    the verdict's negative class (no human re-drawing). True-positive
    verdicts and FPs on track events are skipped with a notice.
    """
    unknown = [v.event_id for v in verdicts if v.event_id not in events]
    if unknown:
        raise UnknownEventError(unknown)

    entries: list[ManifestEntry] = []
    skipped_tp = 0
    for verdict in verdicts:
        event = events[verdict.event_id]
        check_verdict_against_event(verdict, event.event_type)
        if verdict.verdict is VerdictKind.TRUE_POSITIVE:
            skipped_tp += 1
            continue
        if event.event_type not in _REQUIRED_NEGATIVE:
            logger.info(
                "collect_fp: %s verdict on %s event %s has no trainable negative class, skipped",
                verdict.verdict.value, event.event_type.value, verdict.event_id,
            )
            continue
        image = event.image_ref if event.image_ref is not None else f"event://{event.event_id}"
        entries.append(
            ManifestEntry(
                image=image,
                objects=(LabeledObject(event.evidence_box, verdict.negative_class),),
            )
        )
    if skipped_tp:
        logger.info("collect_fp: ignored %d true_positive verdicts", skipped_tp)
    if not entries:
        logger.warning("collect_fp: no false_positive verdicts, manifest %r is a no-op", name)
    return DatasetManifest(
        name=name,
        entries=tuple(entries),
        provenance=Provenance.FP_COLLECTED,
        created=created or datetime.now(timezone.utc),
    )


@dataclass(frozen=True)
class CompositionReport:
    model_name: str
    manifests: tuple[str, ...]
    image_count: int
    class_counts: dict[ObjectClass, int]
    per_manifest_counts: dict[str, dict[ObjectClass, int]]

    def to_dict(self) -> dict:
        return {
            "model_name": self.model_name,
            "manifests": list(self.manifests),
            "image_count": self.image_count,
            "class_counts": {c.value: n for c, n in self.class_counts.items()},
            "per_manifest_counts": {
                name: {c.value: n for c, n in counts.items()}
                for name, counts in self.per_manifest_counts.items()
            },
        }


def compose_training_set(
    composition: ModelComposition,
    manifests: Mapping[str, DatasetManifest],
    created: Optional[datetime] = None,
) -> tuple[DatasetManifest, CompositionReport]:
    """Concatenate the composition's manifests into one training set.

    Entry order is the composition's manifest order, then each manifest's
    own entry order. The merged set carries 'labeled' provenance since it
    mixes positive and negative objects.
    """
    missing = [n for n in composition.manifests if n not in manifests]
    if missing:
        raise UnresolvedManifestError(missing)

    entries: list[ManifestEntry] = []
    per_manifest: dict[str, dict[ObjectClass, int]] = {}
    for manifest_name in composition.manifests:
        manifest = manifests[manifest_name]
        entries.extend(manifest.entries)
        per_manifest[manifest_name] = manifest.class_counts()

    merged = DatasetManifest(
        name=composition.model_name,
        entries=tuple(entries),
        provenance=Provenance.LABELED,
        created=created or datetime.now(timezone.utc),
    )
    report = CompositionReport(
        model_name=composition.model_name,
        manifests=composition.manifests,
        image_count=len(merged.entries),
        class_counts=merged.class_counts(),
        per_manifest_counts=per_manifest,
    )
    return merged, report


class ManifestRegistry:
    """Named manifests, optionally persisted one JSON document per manifest."""

    def __init__(self, directory: Optional[Path] = None):
        self._directory = Path(directory) if directory else None
        self._manifests: dict[str, DatasetManifest] = {}
        if self._directory and self._directory.is_dir():
            for path in sorted(self._directory.glob("*.json")):
                manifest = DatasetManifest.from_dict(json.loads(path.read_text()))
                self._manifests[manifest.name] = manifest

    def __contains__(self, name: str) -> bool:
        return name in self._manifests

    def __getitem__(self, name: str) -> DatasetManifest:
        return self._manifests[name]

    def keys(self):
        return self._manifests.keys()

    def as_mapping(self) -> Mapping[str, DatasetManifest]:
        return dict(self._manifests)

    def register(self, manifest: DatasetManifest, overwrite: bool = False) -> None:
        if manifest.name in self._manifests and not overwrite:
            raise CurationError(f"manifest {manifest.name!r} already registered")
        self._manifests[manifest.name] = manifest
        if self._directory:
            self._directory.mkdir(parents=True, exist_ok=True)
            path = self._directory / f"{manifest.name}.json"
            path.write_text(json.dumps(manifest.to_dict(), indent=2))


@dataclass(frozen=True)
class ModelRecord:
    model_id: str
    composition: tuple[str, ...]
    metrics: dict
    created: datetime
    trainer_meta: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        doc = {
            "model_id": self.model_id,
            "composition": list(self.composition),
            "metrics": self.metrics,
            "created": self.created.isoformat(),
        }
        if self.trainer_meta:
            doc["trainer_meta"] = self.trainer_meta
        return doc

    @classmethod
    def from_dict(cls, doc: Mapping) -> "ModelRecord":
        return cls(
            model_id=doc["model_id"],
            composition=tuple(doc["composition"]),
            metrics=dict(doc["metrics"]),
            created=datetime.fromisoformat(doc["created"]),
            trainer_meta=dict(doc.get("trainer_meta", {})),
        )


class ModelRegistry:
    """Append-only model lineage, optionally persisted as JSON lines."""

    def __init__(self, path: Optional[Path] = None):
        self._path = Path(path) if path else None
        self._records: list[ModelRecord] = []
        if self._path and self._path.exists():
            for line in self._path.read_text().splitlines():
                if line.strip():
                    self._records.append(ModelRecord.from_dict(json.loads(line)))

    def __contains__(self, model_id: str) -> bool:
        return any(r.model_id == model_id for r in self._records)

    def records(self) -> list[ModelRecord]:
        return list(self._records)

    def get(self, model_id: str) -> ModelRecord:
        for record in self._records:
            if record.model_id == model_id:
                return record
        raise CurationError(f"unknown model {model_id!r}")

    def append(self, record: ModelRecord) -> None:
        if record.model_id in self:
            raise CurationError(f"model {record.model_id!r} already registered")
        self._records.append(record)
        if self._path:
            self._path.parent.mkdir(parents=True, exist_ok=True)
            with self._path.open("a") as fh:
                fh.write(json.dumps(record.to_dict(), sort_keys=True) + "\n")


class TrainingHook(Protocol):
    """Contract a trainer must satisfy for loop_round.

    train() must leave no registry side effects; loop_round performs all
    registrations only after the hook succeeds.
    """

    def train(self, training_set: DatasetManifest, model_id: str) -> None: ...

    def evaluate(self, model_id: str) -> dict: ...


class CommandHook:
    """Training hook that shells out: the manifest is written to a temp file
    and its path substituted for {manifest} ({model_id} likewise)."""

    def __init__(self, train_cmd: Sequence[str], eval_cmd: Optional[Sequence[str]] = None):
        self.train_cmd = list(train_cmd)
        self.eval_cmd = list(eval_cmd) if eval_cmd else None

    def _fill(self, template: Sequence[str], **subs: str) -> list[str]:
        out = []
        for arg in template:
            for key, value in subs.items():
                arg = arg.replace("{" + key + "}", value)
            out.append(arg)
        return out

    def train(self, training_set: DatasetManifest, model_id: str) -> None:
        with tempfile.NamedTemporaryFile("w", suffix=".json", delete=False) as fh:
            json.dump(training_set.to_dict(), fh)
            manifest_path = fh.name
        cmd = self._fill(self.train_cmd, manifest=manifest_path, model_id=model_id)
        result = subprocess.run(cmd, capture_output=True, text=True)
        if result.returncode != 0:
            raise CurationError(f"trainer command failed ({result.returncode}): {result.stderr.strip()}")

    def evaluate(self, model_id: str) -> dict:
        if self.eval_cmd is None:
            return {}
        cmd = self._fill(self.eval_cmd, model_id=model_id)
        result = subprocess.run(cmd, capture_output=True, text=True)
        if result.returncode != 0:
            raise CurationError(f"evaluator command failed ({result.returncode}): {result.stderr.strip()}")
        return json.loads(result.stdout) if result.stdout.strip() else {}


class CurationStore:
    """Manifest and model registries behind a single writer lock.

    Readers may go direct; loop_round and verdict recording must hold
    ``write_lock`` so rounds see a stable verdict set.
    """

    def __init__(self, manifest_dir: Optional[Path] = None, model_log: Optional[Path] = None):
        self.manifests = ManifestRegistry(manifest_dir)
        self.models = ModelRegistry(model_log)
        self.write_lock = threading.Lock()


@dataclass(frozen=True)
class LoopRoundResult:
    model_id: str
    manifest_name: str
    composition: tuple[str, ...]
    consumed_event_ids: tuple[str, ...]
    before_metrics: dict
    after_metrics: dict
    composition_report: CompositionReport

    def to_dict(self) -> dict:
        return {
            "model_id": self.model_id,
            "manifest_name": self.manifest_name,
            "composition": list(self.composition),
            "consumed_event_ids": list(self.consumed_event_ids),
            "before_metrics": self.before_metrics,
            "after_metrics": self.after_metrics,
            "composition_report": self.composition_report.to_dict(),
        }


def loop_round(
    store: CurationStore,
    current_model_id: str,
    events: Mapping[str, EventRecord],
    verdicts: Sequence[ReviewVerdict],
    trainer: TrainingHook,
    new_manifest_name: str,
    new_model_id: str,
    created: Optional[datetime] = None,
) -> LoopRoundResult:
    """One self-enhancement cycle: collect FPs, retrain, evaluate, register.

    Atomic with respect to the registries: nothing is registered until the
    trainer and evaluator both succeed, so a failed round leaves the store
    exactly as it was. The previous model's record stays available for
    rollback.
    """
    with store.write_lock:
        current = store.models.get(current_model_id)
        if new_manifest_name in store.manifests:
            raise CurationError(f"manifest {new_manifest_name!r} already exists")
        if new_model_id in store.models:
            raise CurationError(f"model {new_model_id!r} already exists")

        fp_manifest = collect_fp(events, verdicts, new_manifest_name, created=created)
        composition = ModelComposition(
            model_name=new_model_id,
            manifests=current.composition + (new_manifest_name,),
        )
        staged = dict(store.manifests.as_mapping())
        staged[new_manifest_name] = fp_manifest
        training_set, report = compose_training_set(composition, staged, created=created)

        before_metrics = trainer.evaluate(current_model_id)
        trainer.train(training_set, new_model_id)
        after_metrics = trainer.evaluate(new_model_id)

        store.manifests.register(fp_manifest)
        store.models.append(
            ModelRecord(
                model_id=new_model_id,
                composition=composition.manifests,
                metrics=after_metrics,
                created=created or datetime.now(timezone.utc),
            )
        )
        consumed = tuple(
            v.event_id for v in verdicts if v.verdict is VerdictKind.FALSE_POSITIVE
        )
        return LoopRoundResult(
            model_id=new_model_id,
            manifest_name=new_manifest_name,
            composition=composition.manifests,
            consumed_event_ids=consumed,
            before_metrics=before_metrics,
            after_metrics=after_metrics,
            composition_report=report,
        )
