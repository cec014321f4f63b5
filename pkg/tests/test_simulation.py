from datetime import datetime, timezone

import numpy as np
import pytest

from tad.curation import DatasetManifest, LabeledObject, ManifestEntry, Provenance
from tad.geometry import overlap_area_ratio
from tad.simulation import (
    ScenarioError,
    ScenarioSpec,
    car,
    dark_smear,
    fire,
    generate_scenario,
    glare_artifact,
    person,
    run_closed_loop,
    toy_infer,
    toy_train,
    truth_stream,
    window_features,
)
from tad.simulation.detector import DetectorError
from tad.simulation.scenarios import script_scenario
from tad.tracking import ObjectClass

T0 = datetime(2026, 4, 1, tzinfo=timezone.utc)


def spec_with(entities, frames=5, seed=7, channel="sim01"):
    return ScenarioSpec(channel_id=channel, frames=frames, entities=tuple(entities), seed=seed)


def manifest_from_scenario(spec, name="train", classes=None):
    """Label every rendered frame with its ground truth."""
    frames = {}
    entries = []
    for t, (raster, truth) in enumerate(generate_scenario(spec)):
        ref = f"{name}/{t:05d}"
        frames[ref] = raster
        objects = tuple(
            LabeledObject(box, cls)
            for box, cls in truth.objects
            if classes is None or cls in classes
        )
        if objects:
            entries.append(ManifestEntry(image=ref, objects=objects))
    manifest = DatasetManifest(name=name, entries=tuple(entries), provenance=Provenance.LABELED, created=T0)
    return manifest, frames


class TestScenarios:
    def test_identical_seeds_are_bit_identical(self):
        spec = spec_with([car((30, 60), velocity=(1, 0)), fire((60, 30))], frames=8)
        a = list(generate_scenario(spec))
        b = list(generate_scenario(spec))
        for (fa, ta), (fb, tb) in zip(a, b):
            assert fa.tobytes() == fb.tobytes()
            assert ta == tb

    def test_different_seeds_differ(self):
        e = [car((30, 60), velocity=(1, 0))]
        a = next(iter(generate_scenario(spec_with(e, seed=1))))[0]
        b = next(iter(generate_scenario(spec_with(e, seed=2))))[0]
        assert a.tobytes() != b.tobytes()

    def test_artifacts_never_in_truth(self):
        spec = spec_with([glare_artifact((120, 95)), dark_smear((60, 60))], frames=4)
        for truth in truth_stream(spec):
            assert truth.objects == ()

    def test_stopped_car_truth_is_stationary(self):
        spec = spec_with([car((50, 60), velocity=(2, 0), motion="stop", phase_frame=3, jitter=0.0)], frames=10)
        truths = truth_stream(spec)
        boxes = [t.objects[0][0] for t in truths]
        assert boxes[3] == boxes[9]  # frozen after the stop
        assert boxes[0] != boxes[3]

    def test_reverse_motion_retreats(self):
        spec = spec_with([car((50, 60), velocity=(2, 0), motion="reverse", phase_frame=5, jitter=0.0)], frames=11)
        boxes = [t.objects[0][0] for t in truth_stream(spec)]
        assert boxes[10].x_min == pytest.approx(boxes[0].x_min)  # back where it started
        assert boxes[5].x_min > boxes[0].x_min

    def test_entity_leaving_bounds_rejected(self):
        spec = spec_with([car((150, 60), velocity=(3, 0))], frames=20)
        with pytest.raises(ScenarioError):
            truth_stream(spec)

    def test_spec_json_roundtrip(self):
        spec = spec_with(
            [car((30, 60), velocity=(1, 0), motion="stop", phase_frame=4), dark_smear((90, 60), intensity=70)],
            frames=6,
        )
        back = ScenarioSpec.from_dict(spec.to_dict())
        assert back == spec


@pytest.fixture(scope="module")
def trained():
    spec = spec_with(
        [car((30, 92), velocity=(0.8, 0)), person((120, 20)), fire((52, 30))],
        frames=40, seed=11,
    )
    manifest, frames = manifest_from_scenario(spec)
    model = toy_train(manifest, frames)
    return model, spec


class TestToyDetector:

    def test_retrain_is_identical(self, trained):
        model, spec = trained
        manifest, frames = manifest_from_scenario(spec)
        again = toy_train(manifest, frames)
        assert set(again.prototypes) == set(model.prototypes)
        for cls in model.prototypes:
            assert np.array_equal(again.prototypes[cls], model.prototypes[cls])

    def test_detects_scripted_entities_with_good_iou(self, trained):
        model, spec = trained
        hits = 0
        for t, (raster, truth) in enumerate(generate_scenario(spec)):
            dets = toy_infer(model, raster, channel_id=spec.channel_id, frame_index=t)
            for box, cls in truth.objects:
                matched = [
                    d for d in dets if d.object_class is cls and overlap_area_ratio(d.box, box) >= 0.5
                ]
                hits += bool(matched)
        n_truth = sum(len(t.objects) for t in truth_stream(spec))
        assert hits / n_truth >= 0.95

    def test_blank_frame_has_no_detections(self, trained):
        model, _ = trained
        blank_spec = spec_with([], frames=1)
        raster = next(iter(generate_scenario(blank_spec)))[0]
        assert toy_infer(model, raster) == []

    def test_cars_only_training_emits_no_fire_or_person(self):
        spec = spec_with([car((30, 92), velocity=(0.8, 0))], frames=30, seed=3)
        manifest, frames = manifest_from_scenario(spec, classes=(ObjectClass.CAR,))
        model = toy_train(manifest, frames)
        probe = spec_with(
            [car((30, 92), velocity=(0.8, 0)), person((120, 20)), fire((52, 30)), glare_artifact((120, 95))],
            frames=10, seed=5,
        )
        emitted = set()
        for t, (raster, _) in enumerate(generate_scenario(probe)):
            emitted |= {d.object_class for d in toy_infer(model, raster, frame_index=t)}
        assert ObjectClass.FIRE not in emitted
        assert ObjectClass.PERSON not in emitted

    def test_size_mismatch_rejected(self, trained):
        model, _ = trained
        with pytest.raises(DetectorError):
            toy_infer(model, np.zeros((60, 80), dtype=np.uint8))

    def test_glare_features_closer_to_false_fire_after_training(self, trained):
        base_model, base_spec = trained
        # collect glare windows and train a false_fire prototype from them
        glare_spec = spec_with([glare_artifact((120, 95))], frames=20, seed=13)
        frames = {}
        entries = []
        for t, (raster, _) in enumerate(generate_scenario(glare_spec)):
            ref = f"glare/{t:05d}"
            frames[ref] = raster
            placed = script_scenario(glare_spec)[t][0]
            entries.append(
                ManifestEntry(ref, (LabeledObject(placed.box, ObjectClass.FALSE_FIRE),))
            )
        negatives = DatasetManifest("fp", tuple(entries), Provenance.FP_COLLECTED, T0)
        model = toy_train(negatives, frames)

        probe_raster, _ = next(iter(generate_scenario(spec_with([glare_artifact((118, 94))], seed=21))))
        probe_box = script_scenario(spec_with([glare_artifact((118, 94))], seed=21))[0][0].box
        feats = window_features(probe_raster, probe_box)
        d_false_fire = np.min(np.linalg.norm(model.prototypes[ObjectClass.FALSE_FIRE] - feats, axis=1))
        d_fire = np.min(np.linalg.norm(base_model.prototypes[ObjectClass.FIRE] - feats, axis=1))
        assert d_false_fire < d_fire

    def test_glare_fp_appears_then_is_absorbed_by_negatives(self):
        # positives-only model raises a fire FP on glare; a model that also
        # trained false_fire from glare examples does not
        train_spec = spec_with(
            [car((30, 92), velocity=(0.8, 0)), person((120, 20)), fire((52, 30))],
            frames=40, seed=11,
        )
        positives, frames = manifest_from_scenario(train_spec, name="pos")
        model_a = toy_train(positives, frames)

        glare_spec = spec_with([glare_artifact((120, 95))], frames=15, seed=19)
        glare_frames = list(generate_scenario(glare_spec))
        fp_seen = any(
            any(d.object_class is ObjectClass.FIRE for d in toy_infer(model_a, raster, frame_index=t))
            for t, (raster, _) in enumerate(glare_frames)
        )
        assert fp_seen

        entries = []
        for t, (raster, _) in enumerate(glare_frames):
            ref = f"fp/{t:05d}"
            frames[ref] = raster
            placed = script_scenario(glare_spec)[t][0]
            entries.append(ManifestEntry(ref, (LabeledObject(placed.box, ObjectClass.FALSE_FIRE),)))
        combined = DatasetManifest(
            "pos+fp", positives.entries + tuple(entries), Provenance.LABELED, T0
        )
        model_b = toy_train(combined, frames)
        held_out = spec_with([glare_artifact((122, 96))], frames=15, seed=23)
        fp_after = any(
            any(d.object_class is ObjectClass.FIRE for d in toy_infer(model_b, raster, frame_index=t))
            for t, (raster, _) in enumerate(generate_scenario(held_out))
        )
        assert not fp_after


class TestClosedLoop:
    def test_zero_rounds_reports_baseline_only(self):
        report = run_closed_loop(master_seed=1, rounds=0)
        assert len(report.rounds) == 1
        assert report.rounds[0].model_id == "model-0"
        assert report.rounds[0].metrics["ap"].keys() == {"car", "person", "fire"}

    def test_too_many_rounds_rejected(self):
        with pytest.raises(ValueError):
            run_closed_loop(master_seed=1, rounds=9)

    def test_deterministic_under_master_seed(self):
        a = run_closed_loop(master_seed=5, rounds=1)
        b = run_closed_loop(master_seed=5, rounds=1)
        assert a.to_dict() == b.to_dict()
