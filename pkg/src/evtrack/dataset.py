"""Dataset directory format, crop geometry, and training sample assembly.

Layout: ``seq_%04d/{rgb_%04d.ppm, evt_%04d.tsr, gt.txt}`` with gt.txt
carrying one integer "x y w h" line per frame. Event frames are stored as
[2,H,W] float32 count planes (positive plane first).

Crops follow the usual template/search protocol: with s0 = sqrt(w*h) the
nominal target side, the template covers 2*s0 resized to 128x128 and the
search region 4*s0 resized to 256x256, so the target appears at the same
scale in both.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from math import sqrt
from pathlib import Path

import numpy as np

from .errors import ContractError, ParseError
from .events import simulate_events
from .storage import read_ppm, read_tsr, write_ppm, write_tsr
from .synth import ScenarioSpec, render_clean, _corrupt
from .types import BBox, EventFrame, TrackSample

TEMPLATE_SIZE = 128
SEARCH_SIZE = 256
TEMPLATE_FACTOR = 2.0
SEARCH_FACTOR = 4.0


@dataclass
class Sequence:
    name: str
    frames: list[np.ndarray]        # [H,W,3] uint8
    events: list[EventFrame]
    boxes: list[BBox]

    def __len__(self) -> int:
        return len(self.frames)


# -- corpus generation ---------------------------------------------------------


def build_sequence(spec: ScenarioSpec, threshold: float, name: str) -> Sequence:
    """Render a scenario, simulate events on the clean luminance, then
    corrupt the RGB frames."""
    clean, boxes = render_clean(spec)
    events = simulate_events(clean, threshold)
    frames = [
        np.rint(np.clip(_corrupt(f, spec), 0.0, 1.0) * 255.0).astype(np.uint8)
        for f in clean
    ]
    return Sequence(name=name, frames=frames, events=events, boxes=boxes)


def scenario_grid(count: int, frames: int, seed: int,
                  canvas=None) -> list[ScenarioSpec]:
    """Deterministic mix of shapes/trajectories/corruptions for a corpus."""
    from .synth import DEFAULT_CANVAS, CORRUPTIONS, SHAPES, TRAJECTORIES

    canvas = canvas or DEFAULT_CANVAS
    rng = np.random.default_rng(seed)
    specs = []
    for i in range(count):
        specs.append(ScenarioSpec(
            frames=frames,
            canvas=canvas,
            shape=SHAPES[i % len(SHAPES)],
            trajectory=TRAJECTORIES[i % len(TRAJECTORIES)],
            speed=float(rng.uniform(1.5, 4.0)),
            corruption=CORRUPTIONS[i % len(CORRUPTIONS)],
            severity=float(rng.uniform(0.3, 0.8)),
            background_seed=int(rng.integers(0, 2**31)),
            seed=int(rng.integers(0, 2**31)),
        ))
    return specs


def build_corpus(count: int, frames: int, seed: int, threshold: float,
                 canvas=None) -> list[Sequence]:
    specs = scenario_grid(count, frames, seed, canvas)
    return [build_sequence(s, threshold, f"seq_{i:04d}") for i, s in enumerate(specs)]


# -- directory I/O --------------------------------------------------------------


def write_dataset(root, sequences: list[Sequence]) -> None:
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    for seq in sequences:
        d = root / seq.name
        d.mkdir(parents=True, exist_ok=True)
        for i, frame in enumerate(seq.frames):
            write_ppm(d / f"rgb_{i:04d}.ppm", frame)
        for i, ef in enumerate(seq.events):
            write_tsr(d / f"evt_{i:04d}.tsr", ef.planes())
        with open(d / "gt.txt", "w") as f:
            for b in seq.boxes:
                f.write(f"{int(b.x)} {int(b.y)} {int(b.w)} {int(b.h)}\n")


def _read_gt(path) -> list[BBox]:
    boxes = []
    with open(path) as f:
        for lineno, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 4:
                raise ParseError(f"{path}:{lineno}: expected 4 fields, got {len(parts)}")
            try:
                x, y, w, h = (int(p) for p in parts)
            except ValueError:
                raise ParseError(f"{path}:{lineno}: non-integer box field")
            boxes.append(BBox(x=x, y=y, w=w, h=h))
    return boxes


def read_dataset(root) -> list[Sequence]:
    root = Path(root)
    if not root.is_dir():
        raise FileNotFoundError(f"dataset directory not found: {root}")
    seq_dirs = sorted(p for p in root.iterdir()
                      if p.is_dir() and re.fullmatch(r"seq_\d{4}", p.name))
    if not seq_dirs:
        raise ParseError(f"{root}: no seq_NNNN directories found")
    sequences = []
    for d in seq_dirs:
        boxes = _read_gt(d / "gt.txt")
        frames, events = [], []
        for i in range(len(boxes)):
            frames.append(read_ppm(d / f"rgb_{i:04d}.ppm"))
            planes = read_tsr(d / f"evt_{i:04d}.tsr")
            events.append(EventFrame.from_planes(planes, frame_index=i))
        sequences.append(Sequence(name=d.name, frames=frames, events=events, boxes=boxes))
    return sequences


# -- crop geometry ---------------------------------------------------------------


def crop_resize(chw: np.ndarray, center: tuple[float, float], side: float,
                out_size: int) -> np.ndarray:
    """Bilinear crop of a [C,H,W] float array; outside pixels read as 0."""
    C, H, W = chw.shape
    cx, cy = center
    u = (np.arange(out_size, dtype=np.float64) + 0.5) * (side / out_size)
    fx = cx - side / 2.0 + u - 0.5
    fy = cy - side / 2.0 + u - 0.5
    x0 = np.floor(fx).astype(np.int64)
    y0 = np.floor(fy).astype(np.int64)
    wx = (fx - x0).astype(np.float32)
    wy = (fy - y0).astype(np.float32)

    def sample(yi, xi):
        valid = ((yi >= 0) & (yi < H))[:, None] & ((xi >= 0) & (xi < W))[None, :]
        v = chw[:, yi.clip(0, H - 1)[:, None], xi.clip(0, W - 1)[None, :]]
        return v * valid[None, :, :]

    w00 = (1 - wy)[:, None] * (1 - wx)[None, :]
    w01 = (1 - wy)[:, None] * wx[None, :]
    w10 = wy[:, None] * (1 - wx)[None, :]
    w11 = wy[:, None] * wx[None, :]
    out = (sample(y0, x0) * w00 + sample(y0, x0 + 1) * w01
           + sample(y0 + 1, x0) * w10 + sample(y0 + 1, x0 + 1) * w11)
    return out.astype(np.float32)


def nominal_side(box: BBox) -> float:
    return sqrt(float(box.w) * float(box.h))


def crop_pair(frame_u8: np.ndarray, ef: EventFrame, center, side: float,
              out_size: int) -> tuple[np.ndarray, np.ndarray]:
    rgb = frame_u8.astype(np.float32).transpose(2, 0, 1) / 255.0
    rgb_c = crop_resize(rgb, center, side, out_size)
    evt_c = crop_resize(ef.planes(), center, side, out_size)
    return rgb_c, evt_c


def make_track_sample(seq: Sequence, search_frame: int,
                      jitter: tuple[float, float] = (0.0, 0.0)) -> TrackSample:
    """Template from frame 0's ground truth, search around the (jittered)
    target center of ``search_frame``; gt returned in search coordinates."""
    if not 1 <= search_frame < len(seq):
        raise ContractError(f"search frame {search_frame} outside sequence of {len(seq)}")
    tb = seq.boxes[0]
    rgb_t, evt_t = crop_pair(seq.frames[0], seq.events[0], tb.center,
                             TEMPLATE_FACTOR * nominal_side(tb), TEMPLATE_SIZE)
    sb = seq.boxes[search_frame]
    side = SEARCH_FACTOR * nominal_side(sb)
    ccx = sb.center[0] + jitter[0] * side
    ccy = sb.center[1] + jitter[1] * side
    rgb_s, evt_s = crop_pair(seq.frames[search_frame], seq.events[search_frame],
                             (ccx, ccy), side, SEARCH_SIZE)
    scale = SEARCH_SIZE / side
    gx = (sb.x - (ccx - side / 2.0)) * scale
    gy = (sb.y - (ccy - side / 2.0)) * scale
    gt = BBox(x=gx, y=gy, w=sb.w * scale, h=sb.h * scale)
    cx, cy = gt.center
    if not (0 <= cx < SEARCH_SIZE and 0 <= cy < SEARCH_SIZE):
        raise ContractError("make_track_sample: gt center fell outside the search crop")
    return TrackSample(rgb_template=rgb_t, rgb_search=rgb_s,
                       evt_template=evt_t, evt_search=evt_s, gt=gt)


def search_to_canvas(box: BBox, center, side: float) -> BBox:
    """Map a box predicted in search-crop coordinates back to the canvas."""
    scale = side / SEARCH_SIZE
    ox = center[0] - side / 2.0
    oy = center[1] - side / 2.0
    return BBox(x=ox + box.x * scale, y=oy + box.y * scale,
                w=box.w * scale, h=box.h * scale)
