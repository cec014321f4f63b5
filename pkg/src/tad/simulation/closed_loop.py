"""The self-enhancement experiment, end to end and deterministic.

Round 0 trains the toy detector on positives only. Each later round runs the
detection + incident pipeline over FP-inducing scenarios, auto-verdicts the
resulting alarms against ground truth (standing in for the site reviewer),
feeds the FP verdicts through curation.loop_round, and re-evaluates on
held-out scenarios: per-class AP, FP re-inference rates, and fire alarms per
day on held-out glare footage.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from ..curation import (
    CurationStore,
    DatasetManifest,
    EventRecord,
    LabeledObject,
    ManifestEntry,
    ModelComposition,
    ModelRecord,
    Provenance,
    ReviewVerdict,
    VerdictKind,
    compose_training_set,
    loop_round,
)
from ..evaluation import (
    GroundTruthFrame,
    alarm_series,
    average_precision,
    fp_reinference_rate,
)
from ..geometry import Axis, Direction, TravelAxis, overlap_area_ratio
from ..incidents import IncidentEngine, IncidentEvent, IncidentType, RuleConfig
from ..tracking import ChannelTracker, Detection, ObjectClass, TrackerConfig
from .detector import DetectorConfig, ToyDetectorModel, toy_infer, toy_train
from .scenarios import (
    ScenarioSpec,
    car,
    dark_smear,
    fire,
    generate_scenario,
    glare_artifact,
    person,
)

logger = logging.getLogger(__name__)

_BASE_TIME = datetime(2026, 1, 1, tzinfo=timezone.utc)
_TRAVEL_AXIS = TravelAxis(Axis.HORIZONTAL, Direction.INCREASING)

# Two dark-smear phenotypes: the faint one shows up everywhere, the
# car-shadow one sits much closer to the person class in feature space.
_SMEAR_V1 = {"intensity": 15.0, "size": (7.0, 16.0)}
_SMEAR_V2 = {"intensity": 70.0, "size": (8.0, 20.0)}


@dataclass(frozen=True)
class ScenarioSuite:
    train: tuple[ScenarioSpec, ...]
    fp_batches: tuple[tuple[ScenarioSpec, ...], ...]
    eval_detection: tuple[ScenarioSpec, ...]
    heldout_smear: tuple[ScenarioSpec, ...]
    heldout_glare: tuple[ScenarioSpec, ...]
    fps: float = 25.0


def _train_scenario(channel_id: str, seed: int, rng: np.random.Generator) -> ScenarioSpec:
    dx = float(rng.uniform(-3, 3))
    return ScenarioSpec(
        channel_id=channel_id,
        frames=110,
        seed=seed,
        entities=(
            car((20 + dx, 92), velocity=(0.6, 0.0)),
            car((25 + dx, 60), velocity=(0.8, 0.0)),
            person((120 + dx, 20)),
            person((85 + dx, 20)),
            fire((52, 30)),
        ),
    )


def _glare_scenario(channel_id: str, seed: int, rng: np.random.Generator, frames: int) -> ScenarioSpec:
    dx = float(rng.uniform(-4, 4))
    speed = 0.7 if frames <= 160 else 0.3
    return ScenarioSpec(
        channel_id=channel_id,
        frames=frames,
        seed=seed,
        entities=(
            glare_artifact((120 + dx, 95)),
            car((20, 60), velocity=(speed, 0.0)),
        ),
    )


def _smear_scenario(
    channel_id: str, seed: int, rng: np.random.Generator, variant: dict, frames: int
) -> ScenarioSpec:
    dx = float(rng.uniform(-4, 4))
    return ScenarioSpec(
        channel_id=channel_id,
        frames=frames,
        seed=seed,
        entities=(
            dark_smear((60 + dx, 60), intensity=variant["intensity"], size=variant["size"]),
            dark_smear((110 + dx, 60), intensity=variant["intensity"], size=variant["size"]),
        ),
    )


def _eval_scenario(channel_id: str, seed: int, rng: np.random.Generator, artifact: str) -> ScenarioSpec:
    dx = float(rng.uniform(-3, 3))
    entities = [
        car((18 + dx, 92), velocity=(0.55, 0.0)),
        car((30 + dx, 60), velocity=(0.5, 0.0)),
        person((120 + dx, 20)),
        person((85 + dx, 20)),
        fire((52, 30)),
    ]
    if artifact == "glare":
        entities.append(glare_artifact((120, 95)))
    elif artifact == "smear_v1":
        entities.append(dark_smear((140, 60), **_SMEAR_V1))
    elif artifact == "smear_v2":
        entities.append(dark_smear((140, 60), **_SMEAR_V2))
    return ScenarioSpec(channel_id=channel_id, frames=100, seed=seed, entities=tuple(entities))


def default_suite(master_seed: int = 0) -> ScenarioSuite:
    """Deterministic scenario suite: positives for training, two FP batches
    (glare + faint smears, then car-shadow smears), held-out evaluation and
    held-out FP scenarios of both phenomenologies."""
    rng = np.random.default_rng([master_seed, 3])
    seeds = iter(int(s) for s in rng.integers(1, 2**31 - 1, size=64))

    train = tuple(_train_scenario(f"train-{i}", next(seeds), rng) for i in range(3))
    batch_a = tuple(
        [_glare_scenario(f"fpA-g{i}", next(seeds), rng, frames=120) for i in range(3)]
        + [_smear_scenario(f"fpA-s{i}", next(seeds), rng, _SMEAR_V1, frames=120) for i in range(3)]
    )
    batch_b = tuple(
        _smear_scenario(f"fpB-s{i}", next(seeds), rng, _SMEAR_V2, frames=120) for i in range(4)
    )
    eval_detection = tuple(
        _eval_scenario(f"eval-{i}", next(seeds), rng, artifact)
        for i, artifact in enumerate(("glare", "smear_v1", "smear_v2"))
    )
    heldout_smear = tuple(
        _smear_scenario(f"hold-s{i}", next(seeds), rng, variant, frames=100)
        for i, variant in enumerate((_SMEAR_V1, _SMEAR_V1, _SMEAR_V2, _SMEAR_V2))
    )
    heldout_glare = tuple(
        _glare_scenario(f"hold-g{i}", next(seeds), rng, frames=350) for i in range(3)
    )
    return ScenarioSuite(
        train=train,
        fp_batches=(batch_a, batch_b),
        eval_detection=eval_detection,
        heldout_smear=heldout_smear,
        heldout_glare=heldout_glare,
    )


@dataclass
class _RenderedScenario:
    spec: ScenarioSpec
    refs: list[str]
    frames: list[np.ndarray]
    truths: list[GroundTruthFrame]


def _render(spec: ScenarioSpec, prefix: str, store: dict[str, np.ndarray]) -> _RenderedScenario:
    refs, frames, truths = [], [], []
    for t, (frame, truth) in enumerate(generate_scenario(spec)):
        ref = f"{prefix}/{spec.channel_id}/{t:05d}"
        store[ref] = frame
        refs.append(ref)
        frames.append(frame)
        truths.append(truth)
    return _RenderedScenario(spec=spec, refs=refs, frames=frames, truths=truths)


def _labeled_manifest(rendered: Sequence[_RenderedScenario], created: datetime) -> DatasetManifest:
    entries = []
    for scenario in rendered:
        for ref, truth in zip(scenario.refs, scenario.truths):
            objects = tuple(LabeledObject(box, cls) for box, cls in truth.objects)
            if objects:
                entries.append(ManifestEntry(image=ref, objects=objects))
    return DatasetManifest(
        name="labeled", entries=tuple(entries), provenance=Provenance.LABELED, created=created
    )


def _run_incident_pipeline(
    model: ToyDetectorModel,
    rendered: _RenderedScenario,
    rule_cfg: RuleConfig,
    tracker_cfg: TrackerConfig,
    start_time: datetime,
    fps: float,
) -> list[tuple[IncidentEvent, str]]:
    """Detector -> tracker -> incident rules over one rendered scenario.

    Returns each event with the image ref of its evidence frame.
    """
    channel = rendered.spec.channel_id
    tracker = ChannelTracker(channel, tracker_cfg)
    engine = IncidentEngine(channel, _TRAVEL_AXIS, rule_cfg)
    out: list[tuple[IncidentEvent, str]] = []
    for t, frame in enumerate(rendered.frames):
        detections = toy_infer(model, frame, channel_id=channel, frame_index=t)
        tracks = tracker.step(t, detections)
        wall_clock = start_time + timedelta(seconds=t / fps)
        for event in engine.process_frame(t, detections, tracks, wall_clock):
            out.append((event, rendered.refs[event.frame_end]))
    return out


class _ToyHook:
    """curation.TrainingHook backed by the toy detector and the suite's
    held-out scenarios. Evaluations are cached per model id (deterministic)."""

    def __init__(
        self,
        frame_store: dict[str, np.ndarray],
        eval_scenarios: list[_RenderedScenario],
        heldout_smear: list[_RenderedScenario],
        heldout_glare: list[_RenderedScenario],
        rule_cfg: RuleConfig,
        tracker_cfg: TrackerConfig,
        fps: float,
        detector_cfg: Optional[DetectorConfig] = None,
        subsample: int = 5,
    ):
        self.frame_store = frame_store
        self.eval_scenarios = eval_scenarios
        self.heldout_smear = heldout_smear
        self.heldout_glare = heldout_glare
        self.rule_cfg = rule_cfg
        self.tracker_cfg = tracker_cfg
        self.fps = fps
        self.detector_cfg = detector_cfg or DetectorConfig()
        self.subsample = subsample
        self.models: dict[str, ToyDetectorModel] = {}
        self._trained_fp_refs: dict[str, dict[ObjectClass, list[str]]] = {}
        self._metrics_cache: dict[str, dict] = {}

    def train(self, training_set: DatasetManifest, model_id: str) -> None:
        self.models[model_id] = toy_train(training_set, self.frame_store, self.detector_cfg)
        by_class: dict[ObjectClass, list[str]] = {}
        for entry in training_set.entries:
            for obj in entry.objects:
                if obj.object_class is ObjectClass.FALSE_PERSON:
                    by_class.setdefault(ObjectClass.PERSON, []).append(entry.image)
                elif obj.object_class is ObjectClass.FALSE_FIRE:
                    by_class.setdefault(ObjectClass.FIRE, []).append(entry.image)
        self._trained_fp_refs[model_id] = by_class

    def evaluate(self, model_id: str) -> dict:
        if model_id in self._metrics_cache:
            return self._metrics_cache[model_id]
        model = self.models[model_id]
        infer = lambda image: toy_infer(model, image)  # noqa: E731

        detections: list[Detection] = []
        truths: list[GroundTruthFrame] = []
        for scenario in self.eval_scenarios:
            for t, frame in enumerate(scenario.frames):
                detections.extend(
                    toy_infer(model, frame, channel_id=scenario.spec.channel_id, frame_index=t)
                )
            truths.extend(scenario.truths)
        ap = {
            cls.value: average_precision(detections, truths, cls)
            for cls in (ObjectClass.CAR, ObjectClass.PERSON, ObjectClass.FIRE)
        }

        smear_images = [
            frame
            for scenario in self.heldout_smear
            for frame in scenario.frames[:: self.subsample]
        ]
        glare_images = [
            frame
            for scenario in self.heldout_glare
            for frame in scenario.frames[:: self.subsample]
        ]
        fp_rate_heldout = {
            ObjectClass.PERSON.value: fp_reinference_rate(infer, smear_images, ObjectClass.PERSON),
            ObjectClass.FIRE.value: fp_reinference_rate(infer, glare_images, ObjectClass.FIRE),
        }
        fp_rate_trained = {}
        for target, refs in self._trained_fp_refs.get(model_id, {}).items():
            images = [self.frame_store[ref] for ref in refs]
            if images:
                fp_rate_trained[target.value] = fp_reinference_rate(infer, images, target)

        glare_events: list[IncidentEvent] = []
        for day, scenario in enumerate(self.heldout_glare):
            start = _BASE_TIME + timedelta(days=day)
            events = _run_incident_pipeline(
                model, scenario, self.rule_cfg, self.tracker_cfg, start, self.fps
            )
            glare_events.extend(event for event, _ in events)
        fire_events = [e for e in glare_events if e.event_type is IncidentType.FIRE]
        series = alarm_series(
            fire_events,
            bucket="day",
            start=_BASE_TIME,
            end=_BASE_TIME + timedelta(days=len(self.heldout_glare) - 1),
        )
        per_day = [0] * len(series.bucket_starts)
        for counts in series.series.values():
            per_day = [a + b for a, b in zip(per_day, counts)]

        metrics = {
            "ap": ap,
            "fp_rate_heldout": fp_rate_heldout,
            "fp_rate_trained": fp_rate_trained,
            "heldout_fire_alarm_total": len(fire_events),
            "heldout_fire_alarms_per_day": per_day,
        }
        self._metrics_cache[model_id] = metrics
        return metrics


def _auto_verdict(
    event_id: str,
    event: IncidentEvent,
    truths: Sequence[GroundTruthFrame],
    reviewed_at: datetime,
    iou_threshold: float = 0.5,
) -> Optional[ReviewVerdict]:
    """Ground-truth stand-in for the human reviewer (fire/person events only)."""
    if event.event_type is IncidentType.FIRE:
        cls, negative = ObjectClass.FIRE, ObjectClass.FALSE_FIRE
    elif event.event_type is IncidentType.PERSON:
        cls, negative = ObjectClass.PERSON, ObjectClass.FALSE_PERSON
    else:
        return None
    truth = truths[event.frame_end]
    genuine = any(
        c is cls and overlap_area_ratio(event.evidence_box, box) >= iou_threshold
        for box, c in truth.objects
    )
    if genuine:
        return ReviewVerdict(
            event_id=event_id,
            verdict=VerdictKind.TRUE_POSITIVE,
            reviewer="auto-oracle",
            reviewed_at=reviewed_at,
        )
    return ReviewVerdict(
        event_id=event_id,
        verdict=VerdictKind.FALSE_POSITIVE,
        reviewer="auto-oracle",
        reviewed_at=reviewed_at,
        negative_class=negative,
    )


@dataclass
class RoundReport:
    round_index: int
    model_id: str
    composition: tuple[str, ...]
    metrics: dict
    manifest_name: Optional[str] = None
    collected_counts: dict[str, int] = field(default_factory=dict)
    consumed_event_ids: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "round": self.round_index,
            "model_id": self.model_id,
            "composition": list(self.composition),
            "manifest_name": self.manifest_name,
            "collected_counts": self.collected_counts,
            "consumed_event_ids": list(self.consumed_event_ids),
            "metrics": self.metrics,
        }


@dataclass
class ClosedLoopReport:
    master_seed: int
    rounds: list[RoundReport]

    def to_dict(self) -> dict:
        return {"master_seed": self.master_seed, "rounds": [r.to_dict() for r in self.rounds]}

    def save(self, path: Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")


def run_closed_loop(
    master_seed: int = 0,
    rounds: int = 2,
    suite: Optional[ScenarioSuite] = None,
    store: Optional[CurationStore] = None,
) -> ClosedLoopReport:
    """Run the full loop for ``rounds`` retraining rounds (0 = baseline only)."""
    suite = suite or default_suite(master_seed)
    if rounds > len(suite.fp_batches):
        raise ValueError(
            f"suite provides {len(suite.fp_batches)} FP batches, cannot run {rounds} rounds"
        )
    store = store or CurationStore()
    rule_cfg = RuleConfig(
        confidence_floor={ObjectClass.FIRE: 0.45, ObjectClass.PERSON: 0.45}
    )
    tracker_cfg = TrackerConfig()

    frame_store: dict[str, np.ndarray] = {}
    rendered_train = [_render(s, "train", frame_store) for s in suite.train]
    rendered_eval = [_render(s, "eval", frame_store) for s in suite.eval_detection]
    rendered_hold_smear = [_render(s, "hold-smear", frame_store) for s in suite.heldout_smear]
    rendered_hold_glare = [_render(s, "hold-glare", frame_store) for s in suite.heldout_glare]
    rendered_batches = [
        [_render(s, f"fp-batch-{i + 1}", frame_store) for s in batch]
        for i, batch in enumerate(suite.fp_batches[:rounds])
    ]

    hook = _ToyHook(
        frame_store,
        rendered_eval,
        rendered_hold_smear,
        rendered_hold_glare,
        rule_cfg,
        tracker_cfg,
        suite.fps,
    )

    labeled = _labeled_manifest(rendered_train, created=_BASE_TIME)
    store.manifests.register(labeled)
    baseline_set, _ = compose_training_set(
        ModelComposition("model-0", ("labeled",)), store.manifests.as_mapping(), created=_BASE_TIME
    )
    hook.train(baseline_set, "model-0")
    baseline_metrics = hook.evaluate("model-0")
    store.models.append(
        ModelRecord(
            model_id="model-0",
            composition=("labeled",),
            metrics=baseline_metrics,
            created=_BASE_TIME,
        )
    )
    reports = [
        RoundReport(
            round_index=0, model_id="model-0", composition=("labeled",), metrics=baseline_metrics
        )
    ]

    for r in range(1, rounds + 1):
        model = hook.models[f"model-{r - 1}"]
        round_time = _BASE_TIME + timedelta(days=56 * r)  # model swap cadence
        events: dict[str, EventRecord] = {}
        verdicts: list[ReviewVerdict] = []
        n = 0
        for scenario in rendered_batches[r - 1]:
            found = _run_incident_pipeline(
                model, scenario, rule_cfg, tracker_cfg, round_time, suite.fps
            )
            for event, image_ref in found:
                event_id = f"r{r}-evt-{n:04d}"
                n += 1
                events[event_id] = EventRecord(
                    event_id=event_id,
                    event_type=event.event_type,
                    evidence_box=event.evidence_box,
                    image_ref=image_ref,
                )
                verdict = _auto_verdict(event_id, event, scenario.truths, round_time)
                if verdict is not None:
                    verdicts.append(verdict)

        result = loop_round(
            store,
            current_model_id=f"model-{r - 1}",
            events=events,
            verdicts=verdicts,
            trainer=hook,
            new_manifest_name=f"fp-batch-{r}",
            new_model_id=f"model-{r}",
            created=round_time,
        )
        collected = {
            cls.value: count
            for cls, count in store.manifests[result.manifest_name].class_counts().items()
            if count
        }
        reports.append(
            RoundReport(
                round_index=r,
                model_id=result.model_id,
                composition=result.composition,
                metrics=result.after_metrics,
                manifest_name=result.manifest_name,
                collected_counts=collected,
                consumed_event_ids=result.consumed_event_ids,
            )
        )
        logger.info(
            "round %d: %s collected=%s ap=%s fp_heldout=%s",
            r,
            result.model_id,
            collected,
            result.after_metrics["ap"],
            result.after_metrics["fp_rate_heldout"],
        )
    return ClosedLoopReport(master_seed=master_seed, rounds=reports)
