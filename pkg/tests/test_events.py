"""Event simulator: quantizer semantics, monotonicity, rendering."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from evtrack.errors import ContractError
from evtrack.events import LOG_EPS, planes_to_image, render_event_image, simulate_events
from evtrack.types import EventFrame
from oracles import event_crossings_oracle


def frames_from_levels(levels):
    """Build 1x1 grayscale frames whose log-intensities equal ``levels``."""
    return [np.array([[np.exp(lv) - LOG_EPS]]) for lv in levels]


class TestSimulator:
    def test_constant_scene_zero_events(self):
        frames = [np.full((4, 5), 0.4)] * 6
        for ef in simulate_events(frames, 0.15):
            assert ef.total_events() == 0

    def test_first_frame_emits_nothing(self):
        frames = [np.full((2, 2), 0.1), np.full((2, 2), 0.9)]
        evs = simulate_events(frames, 0.05)
        assert evs[0].total_events() == 0
        assert evs[1].total_events() > 0

    def test_exact_two_threshold_step(self):
        i0, i1 = 0.2, 0.8
        l0 = np.log(i0 + LOG_EPS)
        l1 = np.log(i1 + LOG_EPS)
        c = (l1 - l0) / 2.0  # the step is exactly 2 thresholds
        evs = simulate_events([np.array([[i0]]), np.array([[i1]])], c)
        assert evs[1].pos_counts[0, 0] == 2
        assert evs[1].neg_counts[0, 0] == 0

    def test_monotone_ramp_matches_crossing_oracle(self):
        rng = np.random.default_rng(0)
        intensities = np.linspace(0.05, 0.95, 20)
        frames = [np.full((1, 1), v) for v in intensities]
        c = 0.07
        evs = simulate_events(frames, c)
        levels = [np.log(v + LOG_EPS) for v in intensities]
        pos, neg = event_crossings_oracle(levels, c)
        assert [int(e.pos_counts[0, 0]) for e in evs] == pos
        assert [int(e.neg_counts[0, 0]) for e in evs] == neg

    def test_random_series_matches_oracle_per_pixel(self):
        rng = np.random.default_rng(1)
        frames = [rng.uniform(0.02, 0.98, (3, 4)) for _ in range(15)]
        c = 0.11
        evs = simulate_events(frames, c)
        for y in range(3):
            for x in range(4):
                levels = [np.log(f[y, x] + LOG_EPS) for f in frames]
                pos, neg = event_crossings_oracle(levels, c)
                assert [int(e.pos_counts[y, x]) for e in evs] == pos
                assert [int(e.neg_counts[y, x]) for e in evs] == neg

    def test_empty_sequence_rejected(self):
        with pytest.raises(ContractError, match="empty"):
            simulate_events([], 0.1)

    def test_nonpositive_threshold_rejected(self):
        with pytest.raises(ContractError, match="threshold"):
            simulate_events([np.zeros((2, 2))], 0.0)

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=20, deadline=None)
    def test_halving_threshold_never_decreases_counts(self, seed):
        rng = np.random.default_rng(seed)
        frames = [rng.uniform(0.02, 0.98, (4, 4)) for _ in range(8)]
        c = float(rng.uniform(0.05, 0.4))
        coarse = simulate_events(frames, c)
        fine = simulate_events(frames, c / 2.0)
        tc = sum(e.pos_counts + e.neg_counts for e in coarse)
        tf = sum(e.pos_counts + e.neg_counts for e in fine)
        assert (tf >= tc).all()

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=20, deadline=None)
    def test_quantizer_residual_bound(self, seed):
        rng = np.random.default_rng(seed)
        frames = [rng.uniform(0.02, 0.98, (3, 3)) for _ in range(10)]
        c = float(rng.uniform(0.05, 0.4))
        evs = simulate_events(frames, c)
        signed = sum(e.pos_counts.astype(np.int64) - e.neg_counts for e in evs)
        dlog = np.log(frames[-1] + LOG_EPS) - np.log(frames[0] + LOG_EPS)
        assert (np.abs(signed * c - dlog) < c).all()


class TestRendering:
    def test_all_zero_is_white(self):
        ef = EventFrame(3, 2, np.zeros((2, 3), np.int32), np.zeros((2, 3), np.int32))
        img = render_event_image(ef)
        assert (img == 255).all()

    def test_single_positive_event_is_reddish(self):
        pos = np.zeros((2, 2), np.int32)
        pos[0, 1] = 1
        ef = EventFrame(2, 2, pos, np.zeros((2, 2), np.int32))
        img = render_event_image(ef)
        assert tuple(img[0, 1]) == (255, 170, 170)
        assert (img[0, 0] == 255).all()

    def test_saturated_polarities(self):
        pos = np.array([[5]], np.int32)
        neg = np.array([[0]], np.int32)
        assert tuple(render_event_image(EventFrame(1, 1, pos, neg))[0, 0]) == (255, 0, 0)
        assert tuple(render_event_image(EventFrame(1, 1, neg, pos))[0, 0]) == (0, 0, 255)

    def test_mixed_counts_match_documented_map(self):
        rng = np.random.default_rng(2)
        pos = rng.integers(0, 6, (4, 4)).astype(np.int32)
        neg = rng.integers(0, 6, (4, 4)).astype(np.int32)
        img = render_event_image(EventFrame(4, 4, pos, neg))
        for y in range(4):
            for x in range(4):
                ip = min(pos[y, x], 3) / 3.0
                im = min(neg[y, x], 3) / 3.0
                expect = (round(255 * (1 - im)),
                          round(255 * (1 - min(1.0, ip + im))),
                          round(255 * (1 - ip)))
                assert tuple(int(v) for v in img[y, x]) == expect

    def test_planes_shape_check(self):
        with pytest.raises(Exception):
            planes_to_image(np.zeros((3, 4, 4)))
