"""Tracking evaluation: IoU, center error, precision/success rates.

Precision rate is the fraction of frames whose predicted-vs-truth center
error is within 20 px. Success rate is the area under the IoU curve: the
fraction of frames with IoU strictly above t, averaged over the 21
thresholds t = 0.00, 0.05, ..., 1.00 (so perfect tracking scores 20/21).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import hypot
from pathlib import Path

import numpy as np

from .dataset import SEARCH_FACTOR, Sequence, nominal_side
from .errors import ContractError, ParseError
from .types import BBox

PR_THRESHOLD = 20.0
PR_CURVE_MAX = 50
SR_THRESHOLDS = np.linspace(0.0, 1.0, 21)


def iou(a: BBox, b: BBox) -> float:
    if a.w <= 0 or a.h <= 0 or b.w <= 0 or b.h <= 0:
        raise ContractError(f"iou: non-positive extents: {a}, {b}")
    x0 = max(a.x, b.x)
    y0 = max(a.y, b.y)
    x1 = min(a.x + a.w, b.x + b.w)
    y1 = min(a.y + a.h, b.y + b.h)
    inter = max(0.0, x1 - x0) * max(0.0, y1 - y0)
    union = a.w * a.h + b.w * b.h - inter
    return inter / union


def center_error(a: BBox, b: BBox) -> float:
    (ax, ay), (bx, by) = a.center, b.center
    return hypot(ax - bx, ay - by)


def precision_rate(center_errors, threshold: float = PR_THRESHOLD) -> float:
    errors = list(center_errors)
    if not errors:
        raise ContractError("precision_rate: empty error list")
    return sum(1 for e in errors if e <= threshold) / len(errors)


def success_rate(ious) -> float:
    vals = list(ious)
    if not vals:
        raise ContractError("success_rate: empty IoU list")
    if any(v < 0 or v > 1 for v in vals):
        raise ContractError("success_rate: IoU outside [0,1]")
    arr = np.asarray(vals, dtype=np.float64)
    curve = [(arr > t).mean() for t in SR_THRESHOLDS]
    return float(np.mean(curve))


@dataclass
class SeqTrace:
    name: str
    ious: list[float]
    center_errors: list[float]


@dataclass
class EvalReport:
    traces: list[SeqTrace]
    pr_curve: list[float] = field(default_factory=list)   # thresholds 0..50 px
    sr_curve: list[float] = field(default_factory=list)   # 21 IoU thresholds
    pr20: float = 0.0
    sr: float = 0.0

    @classmethod
    def from_traces(cls, traces: list[SeqTrace]) -> "EvalReport":
        all_ious = [v for t in traces for v in t.ious]
        all_err = [v for t in traces for v in t.center_errors]
        if not all_ious:
            raise ContractError("EvalReport: no evaluated frames")
        arr_i = np.asarray(all_ious)
        arr_e = np.asarray(all_err)
        pr_curve = [float((arr_e <= t).mean()) for t in range(PR_CURVE_MAX + 1)]
        sr_curve = [float((arr_i > t).mean()) for t in SR_THRESHOLDS]
        return cls(traces=traces, pr_curve=pr_curve, sr_curve=sr_curve,
                   pr20=precision_rate(all_err), sr=success_rate(all_ious))

    def to_text(self) -> str:
        lines = [
            "tracking evaluation",
            f"  sequences: {len(self.traces)}",
            f"  frames:    {sum(len(t.ious) for t in self.traces)}",
            f"  PR@20px:   {self.pr20:.4f}",
            f"  SR (AUC):  {self.sr:.4f}",
            "",
            f"  {'sequence':<12} {'frames':>6} {'mean IoU':>9} {'mean err':>9}",
        ]
        for t in self.traces:
            lines.append(
                f"  {t.name:<12} {len(t.ious):>6} "
                f"{np.mean(t.ious):>9.4f} {np.mean(t.center_errors):>9.2f}"
            )
        return "\n".join(lines) + "\n"

    def save(self, outdir) -> None:
        d = Path(outdir)
        d.mkdir(parents=True, exist_ok=True)
        (d / "report.txt").write_text(self.to_text())
        with open(d / "pr_curve.csv", "w") as f:
            f.write("threshold,precision\n")
            for t, v in enumerate(self.pr_curve):
                f.write(f"{t},{v!r}\n")
        with open(d / "sr_curve.csv", "w") as f:
            f.write("threshold,success\n")
            for t, v in zip(SR_THRESHOLDS, self.sr_curve):
                f.write(f"{t!r},{v!r}\n")
        with open(d / "traces.csv", "w") as f:
            f.write("sequence,frame,iou,center_error\n")
            for tr in self.traces:
                for i, (u, e) in enumerate(zip(tr.ious, tr.center_errors)):
                    f.write(f"{tr.name},{i},{u!r},{e!r}\n")

    @classmethod
    def load(cls, outdir) -> "EvalReport":
        d = Path(outdir)
        traces: dict[str, SeqTrace] = {}
        with open(d / "traces.csv") as f:
            header = f.readline()
            if header.strip() != "sequence,frame,iou,center_error":
                raise ParseError(f"{d / 'traces.csv'}:1: unexpected header")
            for lineno, line in enumerate(f, 2):
                line = line.strip()
                if not line:
                    continue
                parts = line.split(",")
                if len(parts) != 4:
                    raise ParseError(f"{d / 'traces.csv'}:{lineno}: expected 4 fields")
                name, _, u, e = parts
                tr = traces.setdefault(name, SeqTrace(name, [], []))
                tr.ious.append(float(u))
                tr.center_errors.append(float(e))
        return cls.from_traces(list(traces.values()))


def evaluate_tracker(tracker_factory, dataset: list[Sequence],
                     max_frames: int = 0) -> EvalReport:
    """Run a tracker over every sequence and aggregate PR/SR.

    ``tracker_factory(seq)`` returns a callable mapping a frame index
    (>= 1) to a predicted canvas-coordinate BBox. Frame 0 initializes
    from ground truth and is not scored.
    """
    traces = []
    for seq in dataset:
        track = tracker_factory(seq)
        last = min(len(seq), max_frames + 1) if max_frames else len(seq)
        ious, errs = [], []
        for t in range(1, last):
            pred = track(t)
            ious.append(iou(pred, seq.boxes[t]))
            errs.append(center_error(pred, seq.boxes[t]))
        if ious:
            traces.append(SeqTrace(seq.name, ious, errs))
    return EvalReport.from_traces(traces)


def gt_oracle_factory(seq: Sequence):
    """Reference tracker that replays the ground truth."""
    return lambda t: seq.boxes[t]


def model_tracker_factory(model, search_size: int = 256):
    """Wrap a TrackingModel: template from frame 0, search around the
    previous prediction, decoded box mapped back to canvas coordinates."""
    from .dataset import crop_pair, search_to_canvas, TEMPLATE_FACTOR, TEMPLATE_SIZE, SEARCH_SIZE
    from .head import predict_box

    def factory(seq: Sequence):
        tb = seq.boxes[0]
        rgb_t, evt_t = crop_pair(seq.frames[0], seq.events[0], tb.center,
                                 TEMPLATE_FACTOR * nominal_side(tb), TEMPLATE_SIZE)
        state = {"box": tb}

        def track(t: int) -> BBox:
            prev = state["box"]
            side = SEARCH_FACTOR * nominal_side(prev)
            center = prev.center
            rgb_s, evt_s = crop_pair(seq.frames[t], seq.events[t], center,
                                     side, SEARCH_SIZE)
            batch = {
                "rgb_template": rgb_t[None], "rgb_search": rgb_s[None],
                "evt_template": evt_t[None], "evt_search": evt_s[None],
            }
            sm = model.forward(batch)
            pred = predict_box(sm, 0)
            box = search_to_canvas(pred, center, side)
            # keep the next search window sane even on a bad prediction
            w = min(max(box.w, 4.0), 2.0 * search_size)
            h = min(max(box.h, 4.0), 2.0 * search_size)
            box = BBox(x=box.x + (box.w - w) / 2, y=box.y + (box.h - h) / 2, w=w, h=h)
            state["box"] = box
            return box

        return track

    return factory
