"""Command-line surface.

Subcommands: synth-data, train, eval, viz-features, grad-check. Exit
codes: 0 success, 1 contract/validation error (including usage), 2 I/O
error.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

from .config import RunConfig, apply_overrides, load_config
from .errors import EvtrackError


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(f"{self.format_usage()}error: {message}")


def _build_parser() -> _Parser:
    p = _Parser(prog="evtrack", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="config file (section.key = value lines)")
        sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config key")

    sp = sub.add_parser("synth-data", help="generate a synthetic corpus")
    common(sp)
    sp.add_argument("--out", required=True)
    sp.add_argument("--sequences", type=int)
    sp.add_argument("--frames", type=int)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--threshold", type=float)

    sp = sub.add_parser("train", help="train a tracker")
    common(sp)
    sp.add_argument("--out", default="runs/train")
    sp.add_argument("--data", help="dataset directory (overrides data.dir)")

    sp = sub.add_parser("eval", help="evaluate a checkpoint")
    common(sp)
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--data", help="dataset directory (overrides eval data)")
    sp.add_argument("--out", default="runs/eval")

    sp = sub.add_parser("viz-features", help="export feature-map PPMs")
    common(sp)
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--data", required=True)
    sp.add_argument("--seq", type=int, default=0)
    sp.add_argument("--frame", type=int, default=1)
    sp.add_argument("--out", default="runs/viz")

    sp = sub.add_parser("grad-check", help="run the finite-difference suite")
    common(sp)
    return p


def _load_cfg(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    pairs = []
    for kv in args.set:
        if "=" not in kv:
            raise _UsageError(f"--set expects KEY=VALUE, got {kv!r}")
        key, _, val = kv.partition("=")
        pairs.append((key.strip(), val.strip()))
    if pairs:
        apply_overrides(cfg, pairs, source="--set")
        cfg.validate()
    return cfg


def _cmd_synth_data(args) -> int:
    from .dataset import build_corpus, write_dataset

    cfg = _load_cfg(args)
    n = args.sequences if args.sequences is not None else cfg.data.sequences
    frames = args.frames if args.frames is not None else cfg.data.frames
    seed = args.seed if args.seed is not None else cfg.data.seed
    thr = args.threshold if args.threshold is not None else cfg.data.threshold
    corpus = build_corpus(n, frames, seed, thr)
    write_dataset(args.out, corpus)
    total = sum(len(s) for s in corpus)
    print(f"wrote {len(corpus)} sequences / {total} frames to {args.out}")
    return 0


def _cmd_train(args) -> int:
    from .train import train

    cfg = _load_cfg(args)
    if args.data:
        cfg.data.dir = args.data
    train(cfg, args.out)
    return 0


def _cmd_eval(args) -> int:
    from .dataset import read_dataset
    from .metrics import evaluate_tracker, model_tracker_factory
    from .model import TrackingModel
    from .storage import load_checkpoint
    from .train import run_banner

    cfg = _load_cfg(args)
    print(run_banner(cfg))
    data_dir = args.data or cfg.eval.data or cfg.data.dir
    dataset = read_dataset(data_dir)
    model = TrackingModel(cfg.model, seed=cfg.train.seed)
    model.load_state(load_checkpoint(args.checkpoint))
    report = evaluate_tracker(model_tracker_factory(model), dataset,
                              max_frames=cfg.eval.max_frames)
    report.save(args.out)
    print(report.to_text())
    print(f"report written to {args.out}")
    return 0


def _cmd_viz(args) -> int:
    from .dataset import make_track_sample, read_dataset
    from .model import TrackingModel
    from .storage import load_checkpoint
    from .viz import export_feature_maps

    cfg = _load_cfg(args)
    dataset = read_dataset(args.data)
    if not 0 <= args.seq < len(dataset):
        raise EvtrackError(f"sequence index {args.seq} out of range")
    model = TrackingModel(cfg.model, seed=cfg.train.seed)
    model.load_state(load_checkpoint(args.checkpoint))
    sample = make_track_sample(dataset[args.seq], args.frame)
    written = export_feature_maps(model, sample, args.out)
    print(f"wrote {len(written)} maps to {args.out}")
    return 0


def _cmd_grad_check(args) -> int:
    from .gradsuite import run_suite

    t0 = time.time()
    print("finite-difference gradient suite (float64)")
    results = run_suite()
    bad = [r for r in results if not r.ok]
    print(f"{len(results) - len(bad)}/{len(results)} checks passed "
          f"in {time.time() - t0:.1f}s")
    return 1 if bad else 0


_COMMANDS = {
    "synth-data": _cmd_synth_data,
    "train": _cmd_train,
    "eval": _cmd_eval,
    "viz-features": _cmd_viz,
    "grad-check": _cmd_grad_check,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except _UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except EvtrackError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
