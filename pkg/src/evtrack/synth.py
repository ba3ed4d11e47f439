"""Synthetic tracking scenarios: a textured static background, one moving
object, optional photometric degradation of the RGB output.

The object trajectory and extents are analytic, so ground-truth boxes are
exact; degradations are applied after the ground truth is computed. Event
simulation (see the dataset builder) runs on the clean luminance: the
event sensor is a separate device and is deliberately unaffected by RGB
exposure problems, which is the scenario the fusion model is meant to
exploit.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import cos, pi, sin, sqrt

import numpy as np
from scipy.ndimage import uniform_filter

from .errors import ConfigError
from .types import BBox

SHAPES = ("disk", "rectangle", "bar")
TRAJECTORIES = ("linear", "sinusoidal", "bounce")
CORRUPTIONS = ("none", "overexposure", "underexposure", "blur")

DEFAULT_CANVAS = (346, 230)  # DAVIS-class sensor resolution (width, height)


@dataclass
class ScenarioSpec:
    """Controls one rendered sequence; identical specs render identically."""

    frames: int = 24
    canvas: tuple[int, int] = DEFAULT_CANVAS
    shape: str = "disk"
    trajectory: str = "linear"
    speed: float = 3.0
    corruption: str = "none"
    severity: float = 0.0
    background_seed: int = 0
    seed: int = 0
    # optional explicit geometry; None means "draw from the scenario rng"
    start: tuple[float, float] | None = None
    size_px: float | None = None
    direction: tuple[float, float] | None = None

    def validate(self) -> None:
        if self.frames < 1:
            raise ConfigError("scenario: need at least one frame")
        if self.shape not in SHAPES:
            raise ConfigError(f"scenario: unknown shape {self.shape!r}")
        if self.trajectory not in TRAJECTORIES:
            raise ConfigError(f"scenario: unknown trajectory {self.trajectory!r}")
        if self.corruption not in CORRUPTIONS:
            raise ConfigError(f"scenario: unknown corruption {self.corruption!r}")
        if not 0.0 <= self.severity <= 1.0:
            raise ConfigError(f"scenario: severity {self.severity} outside [0,1]")
        if self.speed < 0:
            raise ConfigError("scenario: speed must be non-negative")


def _background(spec: ScenarioSpec) -> np.ndarray:
    """Static mid-gray texture, [H,W,3] float32 in roughly [0.3, 0.7]."""
    w, h = spec.canvas
    rng = np.random.default_rng(spec.background_seed)
    coarse = rng.uniform(0.3, 0.7, size=(h // 8 + 2, w // 8 + 2, 3)).astype(np.float32)
    up = np.repeat(np.repeat(coarse, 8, axis=0), 8, axis=1)[:h, :w]
    return uniform_filter(up, size=(5, 5, 1), mode="nearest").astype(np.float32)


def _half_extents(spec: ScenarioSpec, rng: np.random.Generator) -> tuple[float, float]:
    base = spec.size_px if spec.size_px is not None else float(rng.uniform(14, 26))
    if spec.shape == "disk":
        r = base / 2.0
        return r, r
    if spec.shape == "rectangle":
        return base / 2.0, base / 2.0 * float(rng.uniform(0.6, 1.0))
    # bar: long and thin, horizontal or vertical
    long_h, short_h = base * 1.2, max(2.0, base * 0.2)
    if rng.random() < 0.5:
        return long_h, short_h
    return short_h, long_h


def _positions(spec: ScenarioSpec, rng: np.random.Generator,
               hw: float, hh: float) -> list[tuple[float, float]]:
    w, h = spec.canvas
    # the box must keep >= 1 px of clearance on every frame
    lo_x, hi_x = hw + 2.0, w - hw - 2.0
    lo_y, hi_y = hh + 2.0, h - hh - 2.0
    if lo_x >= hi_x or lo_y >= hi_y:
        raise ConfigError("scenario: object too large for canvas")
    if spec.start is not None:
        cx, cy = float(spec.start[0]), float(spec.start[1])
    else:
        cx = float(rng.uniform(lo_x + 0.2 * (hi_x - lo_x), hi_x - 0.2 * (hi_x - lo_x)))
        cy = float(rng.uniform(lo_y + 0.2 * (hi_y - lo_y), hi_y - 0.2 * (hi_y - lo_y)))
    if spec.direction is not None:
        dx, dy = spec.direction
        norm = sqrt(dx * dx + dy * dy)
        if norm == 0:
            raise ConfigError("scenario: zero direction vector")
        dx, dy = dx / norm, dy / norm
    else:
        ang = float(rng.uniform(0, 2 * pi))
        dx, dy = cos(ang), sin(ang)

    pts: list[tuple[float, float]] = []
    if spec.trajectory == "linear":
        for t in range(spec.frames):
            pts.append((cx + dx * spec.speed * t, cy + dy * spec.speed * t))
    elif spec.trajectory == "sinusoidal":
        px, py = -dy, dx  # unit perpendicular
        amp = min(12.0, 0.4 * (hi_y - lo_y), 0.4 * (hi_x - lo_x))
        period = max(8.0, spec.frames / 2.0)
        for t in range(spec.frames):
            s = amp * sin(2 * pi * t / period)
            pts.append((cx + dx * spec.speed * t + px * s,
                        cy + dy * spec.speed * t + py * s))
    else:  # bounce
        x, y = cx, cy
        vx, vy = dx * spec.speed, dy * spec.speed
        for _ in range(spec.frames):
            pts.append((x, y))
            x, y = x + vx, y + vy
            if x < lo_x:
                x, vx = 2 * lo_x - x, -vx
            elif x > hi_x:
                x, vx = 2 * hi_x - x, -vx
            if y < lo_y:
                y, vy = 2 * lo_y - y, -vy
            elif y > hi_y:
                y, vy = 2 * hi_y - y, -vy

    for cx_t, cy_t in pts:
        if not (hw + 1 <= cx_t <= w - hw - 1 and hh + 1 <= cy_t <= h - hh - 1):
            raise ConfigError(
                f"scenario: trajectory exits the canvas at center ({cx_t:.1f}, {cy_t:.1f})"
            )
    return pts


def _paint(frame: np.ndarray, spec: ScenarioSpec, center, hw, hh, color) -> None:
    h, wpx = frame.shape[:2]
    cx, cy = center
    x0 = max(0, int(np.floor(cx - hw - 1)))
    x1 = min(wpx, int(np.ceil(cx + hw + 1)))
    y0 = max(0, int(np.floor(cy - hh - 1)))
    y1 = min(h, int(np.ceil(cy + hh + 1)))
    ys, xs = np.mgrid[y0:y1, x0:x1]
    px = xs + 0.5 - cx
    py = ys + 0.5 - cy
    if spec.shape == "disk":
        mask = (px / hw) ** 2 + (py / hh) ** 2 <= 1.0
    else:
        mask = (np.abs(px) <= hw) & (np.abs(py) <= hh)
    frame[y0:y1, x0:x1][mask] = color


def _corrupt(frame: np.ndarray, spec: ScenarioSpec) -> np.ndarray:
    s = spec.severity
    if spec.corruption == "none" or s == 0.0:
        return frame
    if spec.corruption == "overexposure":
        return frame * (1.0 - s) + s
    if spec.corruption == "underexposure":
        return frame * (1.0 - 0.9 * s)
    size = 2 * int(round(3 * s)) + 1
    if size <= 1:
        return frame
    return uniform_filter(frame, size=(size, size, 1), mode="nearest")


def render_clean(spec: ScenarioSpec) -> tuple[list[np.ndarray], list[BBox]]:
    """Uncorrupted frames ([H,W,3] float32 in [0,1]) and exact boxes."""
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    hw, hh = _half_extents(spec, rng)
    centers = _positions(spec, rng, hw, hh)
    bg = _background(spec)
    bright = rng.random() < 0.5
    color = np.array(
        rng.uniform(0.88, 1.0, 3) if bright else rng.uniform(0.0, 0.12, 3),
        dtype=np.float32,
    )
    bw = max(2, int(round(2 * hw)))
    bh = max(2, int(round(2 * hh)))
    frames, boxes = [], []
    for cx, cy in centers:
        f = bg.copy()
        _paint(f, spec, (cx, cy), hw, hh, color)
        frames.append(f)
        boxes.append(BBox(x=int(round(cx)) - bw // 2, y=int(round(cy)) - bh // 2,
                          w=bw, h=bh))
    return frames, boxes


def render_sequence(spec: ScenarioSpec) -> tuple[list[np.ndarray], list[BBox]]:
    """Frames after photometric corruption, plus per-frame ground truth."""
    frames, boxes = render_clean(spec)
    return [np.clip(_corrupt(f, spec), 0.0, 1.0) for f in frames], boxes
