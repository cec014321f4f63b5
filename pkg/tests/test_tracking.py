import json

import numpy as np
import pytest

from tad.geometry import BoundingBox, overlap_area_ratio
from tad.tracking import (
    ChannelTracker,
    Detection,
    FrameOrderError,
    ObjectClass,
    TrackerConfig,
    TrackStatus,
    TrackingError,
    associate,
    box_to_observation,
    initial_state,
    kalman_predict,
    kalman_update,
    observation_to_box,
)

from conftest import brute_force_assignment_total, scalar_kalman_update

CFG = TrackerConfig()


def det(box, frame, channel="ch01", cls=ObjectClass.CAR, conf=0.9):
    return Detection(box=box, object_class=cls, confidence=conf, frame_index=frame, channel_id=channel)


class TestObservationConversion:
    def test_roundtrip(self):
        b = BoundingBox(10, 20, 50, 44)
        z = box_to_observation(b)
        back = observation_to_box(z)
        assert back.as_list() == pytest.approx(b.as_list(), abs=1e-9)


class TestKalmanPredict:
    def test_zero_velocity_is_position_fixed_point(self):
        state = initial_state(BoundingBox(10, 10, 30, 20), CFG)
        after = kalman_predict(state, CFG)
        assert after.mean[:4] == pytest.approx(state.mean[:4])

    def test_velocity_advances_center(self):
        state = initial_state(BoundingBox(0, 0, 20, 10), CFG)
        state.mean[4] = 2.0  # du
        # independent oracle: explicit transition-matrix multiply
        f = np.eye(7)
        f[0, 4] = f[1, 5] = f[2, 6] = 1.0
        expected_mean = f @ state.mean
        expected_cov = f @ state.covariance @ f.T + np.diag(CFG.q_diag)
        after = kalman_predict(state, CFG)
        assert after.mean == pytest.approx(expected_mean)
        assert after.mean[0] == pytest.approx(state.mean[0] + 2.0)
        assert after.covariance == pytest.approx(expected_cov)

    def test_trace_strictly_increases_with_process_noise(self):
        state = initial_state(BoundingBox(5, 5, 15, 15), CFG)
        after = kalman_predict(state, CFG)
        assert np.trace(after.covariance) > np.trace(state.covariance)

    def test_scale_clamped_at_minimum(self):
        state = initial_state(BoundingBox(0, 0, 2, 2), CFG)
        state.mean[6] = -10.0  # ds would push area negative
        after = kalman_predict(state, CFG)
        assert after.mean[2] == CFG.s_min
        assert after.mean[6] == 0.0


class TestKalmanUpdate:
    def test_zero_innovation_keeps_mean(self):
        box = BoundingBox(10, 10, 30, 20)
        cfg = TrackerConfig(r_diag=(1e-9, 1e-9, 1e-9, 1e-9))
        state = initial_state(box, cfg)
        after = kalman_update(state, box, cfg)
        assert after.mean[:4] == pytest.approx(state.mean[:4], abs=1e-9)

    def test_update_never_increases_trace(self):
        state = initial_state(BoundingBox(10, 10, 30, 20), CFG)
        after = kalman_update(state, BoundingBox(12, 11, 33, 22), CFG)
        assert np.trace(after.covariance) <= np.trace(state.covariance)

    def test_scalar_case_matches_closed_form(self):
        box = BoundingBox(10, 10, 30, 20)
        state = initial_state(box, CFG)
        observed = BoundingBox(14, 10, 34, 20)  # moves u by +4, leaves v/s/r
        z = box_to_observation(observed)
        after = kalman_update(state, observed, CFG)
        # diagonal prior: each measured component follows the 1-D formula
        for i in range(4):
            expected_mean, expected_var = scalar_kalman_update(
                state.mean[i], state.covariance[i, i], z[i], CFG.r_diag[i]
            )
            assert after.mean[i] == pytest.approx(expected_mean, rel=1e-9, abs=1e-9)
            assert after.covariance[i, i] == pytest.approx(expected_var, rel=1e-9, abs=1e-9)

    def test_covariance_stays_symmetric_psd_over_many_cycles(self):
        rng = np.random.default_rng(77)
        state = initial_state(BoundingBox(100, 100, 160, 140), CFG)
        box = BoundingBox(100, 100, 160, 140)
        for _ in range(2000):
            state = kalman_predict(state, CFG)
            dx, dy = rng.normal(0, 1.5, size=2)
            box = BoundingBox(box.x_min + dx, box.y_min + dy, box.x_max + dx, box.y_max + dy)
            state = kalman_update(state, box, CFG)
            p = state.covariance
            assert np.max(np.abs(p - p.T)) <= 1e-9
            assert np.linalg.eigvalsh(p).min() >= -1e-9


class TestAssociate:
    def test_empty_sides(self):
        b = BoundingBox(0, 0, 10, 10)
        matches, ut, ud = associate([], [b, b, b], 0.3)
        assert matches == [] and ut == [] and ud == [0, 1, 2]
        matches, ut, ud = associate([b], [], 0.3)
        assert matches == [] and ut == [0] and ud == []

    def test_single_pair_above_threshold(self):
        a = BoundingBox(0, 0, 10, 10)
        b = BoundingBox(0, 0, 10, 15)  # IoU = 10*10 / (10*15) = 2/3
        matches, ut, ud = associate([a], [b], 0.3)
        assert matches == [(0, 0)] and not ut and not ud

    def test_single_pair_below_threshold(self):
        a = BoundingBox(0, 0, 10, 10)
        b = BoundingBox(9, 9, 19, 19)
        matches, ut, ud = associate([a], [b], 0.3)
        assert matches == [] and ut == [0] and ud == [0]

    def test_prefers_total_over_greedy(self):
        # Matrix where greedy would grab (0,0) first but the optimal
        # one-to-one total comes from the swap (0,1),(1,0).
        tracks, dets, iou = _swap_structured_instance()
        assert iou[0, 0] > iou[0, 1] > iou[1, 0] > iou[1, 1]
        assert iou[0, 1] + iou[1, 0] > iou[0, 0] + iou[1, 1]
        matches, _, _ = associate(tracks, dets, 0.3)
        assert sorted(matches) == [(0, 1), (1, 0)]
        total = sum(iou[t, d] for t, d in matches)
        assert total == pytest.approx(brute_force_assignment_total(iou, 0.3), abs=1e-12)

    def test_matches_brute_force_total_on_random_instances(self):
        rng = np.random.default_rng(4321)
        for _ in range(100):
            n_tracks, n_dets = rng.integers(1, 6, size=2)
            tracks = [_random_box(rng) for _ in range(n_tracks)]
            dets = [_random_box(rng) for _ in range(n_dets)]
            iou = np.array([[overlap_area_ratio(t, d) for d in dets] for t in tracks])
            matches, _, _ = associate(tracks, dets, 0.3)
            total = sum(iou[t, d] for t, d in matches)
            assert all(iou[t, d] >= 0.3 for t, d in matches)
            assert total == pytest.approx(brute_force_assignment_total(iou, 0.3), abs=1e-12)

    def test_one_to_one(self):
        rng = np.random.default_rng(99)
        for _ in range(50):
            tracks = [_random_box(rng) for _ in range(5)]
            dets = [_random_box(rng) for _ in range(5)]
            matches, ut, ud = associate(tracks, dets, 0.3)
            t_idx = [t for t, _ in matches]
            d_idx = [d for _, d in matches]
            assert len(set(t_idx)) == len(t_idx)
            assert len(set(d_idx)) == len(d_idx)
            assert sorted(t_idx + ut) == list(range(5))
            assert sorted(d_idx + ud) == list(range(5))

    def test_invalid_threshold(self):
        with pytest.raises(ValueError):
            associate([], [], 1.5)


def _random_box(rng):
    x, y = rng.uniform(0, 80, size=2)
    w, h = rng.uniform(5, 30, size=2)
    return BoundingBox(x, y, x + w, y + h)


def _shift_for_iou(length, iou):
    # equal-length intervals shifted by s have IoU (L-s)/(L+s)
    return length * (1 - iou) / (1 + iou)


def _swap_structured_instance():
    """Two tracks / two detections where the best total assignment is the
    swap, not the single best pair (boxes share a row; IoU set by x-shift)."""
    length = 100.0
    t0 = BoundingBox(0, 0, length, 10)
    t1 = t0.translate(_shift_for_iou(length, 0.9) + _shift_for_iou(length, 0.8), 0)
    d0 = t0.translate(_shift_for_iou(length, 0.9), 0)
    d1 = t0.translate(-_shift_for_iou(length, 0.85), 0)
    tracks, dets = [t0, t1], [d0, d1]
    iou = np.array([[overlap_area_ratio(t, d) for d in dets] for t in tracks])
    return tracks, dets, iou


class TestChannelTracker:
    def test_single_moving_box_keeps_one_id(self):
        tracker = ChannelTracker("ch01", CFG)
        ids = set()
        for t in range(20):
            box = BoundingBox(10 + 5 * t, 50, 40 + 5 * t, 70)
            confirmed = tracker.step(t, [det(box, t)])
            for track in confirmed:
                ids.add(track.track_id)
        assert tracker.tracks_created == 1
        assert ids == {1}
        assert len(tracker.tracks) == 1

    def test_confirmation_requires_min_hits(self):
        tracker = ChannelTracker("ch01", CFG)
        box = BoundingBox(10, 10, 40, 30)
        assert tracker.step(0, [det(box, 0)]) == []
        assert tracker.step(1, [det(box, 1)]) == []
        confirmed = tracker.step(2, [det(box, 2)])
        assert [t.track_id for t in confirmed] == [1]
        assert confirmed[0].status is TrackStatus.CONFIRMED

    def test_track_reaped_after_max_age_and_id_not_reused(self):
        tracker = ChannelTracker("ch01", CFG)
        box = BoundingBox(10, 10, 40, 30)
        frame = 0
        for _ in range(5):
            tracker.step(frame, [det(box, frame)])
            frame += 1
        # starve the track past max_age
        for _ in range(CFG.max_age + 2):
            tracker.step(frame, [])
            frame += 1
        assert tracker.tracks == []
        tracker.step(frame, [det(box, frame)])
        assert tracker.tracks[0].track_id == 2

    def test_two_parallel_cars_no_switches(self):
        tracker = ChannelTracker("ch01", CFG)
        seen: dict[int, set[int]] = {0: set(), 1: set()}
        for t in range(100):
            boxes = [
                BoundingBox(10 + 2 * t, 50, 60 + 2 * t, 80),
                BoundingBox(10 + 2 * t, 250, 60 + 2 * t, 280),
            ]
            confirmed = tracker.step(t, [det(b, t) for b in boxes])
            for track in confirmed:
                track_box = track.current_box()
                best = max(range(2), key=lambda i: overlap_area_ratio(track_box, boxes[i]))
                seen[best].add(track.track_id)
        assert len(seen[0]) == 1 and len(seen[1]) == 1
        assert seen[0] != seen[1]

    def test_deterministic_output(self):
        def run():
            tracker = ChannelTracker("ch01", CFG)
            out = []
            rng = np.random.default_rng(5)
            for t in range(60):
                jitter = rng.uniform(-1, 1)
                box = BoundingBox(10 + 3 * t + jitter, 50, 50 + 3 * t + jitter, 75)
                confirmed = tracker.step(t, [det(box, t)])
                out.append(
                    [
                        (tr.track_id, tuple(round(v, 12) for v in tr.current_box().as_list()))
                        for tr in confirmed
                    ]
                )
            return json.dumps(out, sort_keys=True)

        assert run() == run()

    def test_out_of_order_frame_rejected(self):
        tracker = ChannelTracker("ch01", CFG)
        tracker.step(5, [])
        with pytest.raises(FrameOrderError):
            tracker.step(5, [])
        with pytest.raises(FrameOrderError):
            tracker.step(3, [])

    def test_non_car_detections_ignored(self):
        tracker = ChannelTracker("ch01", CFG)
        box = BoundingBox(10, 10, 40, 30)
        for t in range(5):
            tracker.step(t, [det(box, t, cls=ObjectClass.FIRE)])
        assert tracker.tracks == []

    def test_wrong_channel_rejected(self):
        tracker = ChannelTracker("ch01", CFG)
        with pytest.raises(TrackingError):
            tracker.step(0, [det(BoundingBox(0, 0, 10, 10), 0, channel="ch02")])

    def test_history_window(self):
        tracker = ChannelTracker("ch01", CFG)
        box = BoundingBox(10, 10, 40, 30)
        for t in range(10):
            tracker.step(t, [det(box, t)])
        track = tracker.tracks[0]
        window = track.window(5, 9)
        assert [f for f, _ in window] == [5, 6, 7, 8, 9]
