"""Scenario renderer: determinism, trajectories, corruption contracts."""

import numpy as np
import pytest

from evtrack.errors import ConfigError
from evtrack.synth import ScenarioSpec, render_clean, render_sequence


def spec(**kw):
    base = dict(frames=8, speed=2.0, seed=3, background_seed=5)
    base.update(kw)
    return ScenarioSpec(**base)


class TestRender:
    def test_zero_speed_static(self):
        frames, boxes = render_sequence(spec(speed=0.0))
        for f in frames[1:]:
            assert np.array_equal(f, frames[0])
        for b in boxes[1:]:
            assert b.as_array().tolist() == boxes[0].as_array().tolist()

    def test_overexposure_saturates(self):
        frames, _ = render_sequence(spec(corruption="overexposure", severity=1.0))
        for f in frames:
            assert (f >= 0.95).all()

    def test_underexposure_darkens(self):
        clean, _ = render_sequence(spec())
        dark, _ = render_sequence(spec(corruption="underexposure", severity=1.0))
        assert dark[0].mean() < 0.3 * clean[0].mean()

    def test_linear_speed_exact_displacement(self):
        frames, boxes = render_sequence(spec(
            trajectory="linear", speed=3.0, direction=(1.0, 0.0),
            start=(60.0, 100.0), size_px=20.0, shape="disk"))
        centers = [b.center for b in boxes]
        for (x0, y0), (x1, y1) in zip(centers, centers[1:]):
            assert x1 - x0 == 3.0
            assert y1 - y0 == 0.0

    def test_trajectory_exit_rejected(self):
        with pytest.raises(ConfigError, match="exits"):
            render_sequence(spec(trajectory="linear", speed=30.0,
                                 direction=(1.0, 0.0), start=(300.0, 100.0),
                                 frames=10))

    def test_bounce_stays_inside(self):
        frames, boxes = render_sequence(spec(trajectory="bounce", speed=9.0,
                                             frames=60))
        w, h = 346, 230
        for b in boxes:
            assert b.x >= 0 and b.y >= 0
            assert b.x + b.w <= w and b.y + b.h <= h

    def test_same_seed_bitwise_identical(self):
        f1, b1 = render_sequence(spec(corruption="blur", severity=0.7))
        f2, b2 = render_sequence(spec(corruption="blur", severity=0.7))
        for a, b in zip(f1, f2):
            assert np.array_equal(a, b)
        assert [x.as_array().tolist() for x in b1] == [x.as_array().tolist() for x in b2]

    def test_boxes_tight_to_painted_object(self):
        frames, boxes = render_clean(spec(shape="rectangle", speed=1.0))
        f, b = frames[0], boxes[0]
        inside = f[int(b.y):int(b.y + b.h), int(b.x):int(b.x + b.w)]
        # painted color is uniform inside the box region
        assert inside.std(axis=(0, 1)).max() < 0.35

    def test_bad_severity_rejected(self):
        with pytest.raises(ConfigError):
            render_sequence(spec(severity=1.5))

    def test_unknown_shape_rejected(self):
        with pytest.raises(ConfigError):
            render_sequence(spec(shape="pentagon"))

    def test_canvas_default(self):
        frames, _ = render_sequence(spec())
        assert frames[0].shape == (230, 346, 3)
