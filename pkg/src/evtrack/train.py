"""Training harness: AdamW, deterministic batch sampling, checkpoints.

Everything downstream of (seed, config, dataset) is deterministic, so two
identical runs produce bit-identical checkpoints and loss traces. One
epoch visits ceil(total_pairs / batch) sampled batches, where a pair is
(sequence, frame >= 1); ``train.max_steps`` caps the total optimizer
steps when nonzero.
"""

from __future__ import annotations

import math
import time
from pathlib import Path

import numpy as np

from .config import RunConfig
from .dataset import Sequence, make_track_sample, read_dataset
from .errors import ContractError
from .model import TrackingModel
from .storage import save_checkpoint
from .tensor import backward

JITTER = 0.15  # max |center jitter| as a fraction of the search side


class AdamW:
    """Decoupled weight decay Adam (beta1=0.9, beta2=0.999, eps=1e-8)."""

    def __init__(self, named_params, lr: float, weight_decay: float = 0.0,
                 betas=(0.9, 0.999), eps: float = 1e-8):
        self.params = list(named_params)
        self.lr = lr
        self.wd = weight_decay
        self.b1, self.b2 = betas
        self.eps = eps
        self.t = 0
        self.m = {n: np.zeros_like(p.data) for n, p in self.params}
        self.v = {n: np.zeros_like(p.data) for n, p in self.params}

    def step(self) -> None:
        self.t += 1
        bc1 = 1.0 - self.b1 ** self.t
        bc2 = 1.0 - self.b2 ** self.t
        for name, p in self.params:
            g = p.tensor.grad
            if g is None:
                g = np.zeros_like(p.data)
            m = self.m[name] = self.b1 * self.m[name] + (1.0 - self.b1) * g
            v = self.v[name] = self.b2 * self.v[name] + (1.0 - self.b2) * (g * g)
            update = (m / bc1) / (np.sqrt(v / bc2) + self.eps)
            p.data = p.data - self.lr * (update + self.wd * p.data)

    def zero_grad(self) -> None:
        for _, p in self.params:
            p.tensor.zero_grad()


def sample_batch(dataset: list[Sequence], batch: int, rng: np.random.Generator):
    samples = []
    for _ in range(batch):
        si = int(rng.integers(0, len(dataset)))
        seq = dataset[si]
        fi = int(rng.integers(1, len(seq)))
        jx = float(rng.uniform(-JITTER, JITTER))
        jy = float(rng.uniform(-JITTER, JITTER))
        samples.append(make_track_sample(seq, fi, (jx, jy)))
    return samples


def run_banner(cfg: RunConfig) -> str:
    m = cfg.model
    lines = [
        "run configuration",
        f"  d_model={m.d_model} encoder_layers={m.encoder.layers} "
        f"heads={m.encoder.heads}",
        f"  pooler={'on' if m.pooler.enabled else 'off'} "
        f"mgf.directions={m.mgf.directions} mgf.downsample={m.mgf.downsample} "
        f"mgf.scale_mode={m.mgf.scale_mode} rm.enabled={m.rm.enabled}",
        "  note: desk-scale run (small encoder, no pretrained weights, "
        f"batch {cfg.train.batch}); results are not comparable to any "
        "published benchmark numbers",
    ]
    return "\n".join(lines)


def train(cfg: RunConfig, out_dir, dataset: list[Sequence] | None = None,
          log=print) -> Path:
    """Train per config; returns the path of the final checkpoint."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if dataset is None:
        dataset = read_dataset(cfg.data.dir)
    if not dataset:
        raise ContractError("train: empty dataset")
    log(run_banner(cfg))

    model = TrackingModel(cfg.model, seed=cfg.train.seed)
    opt = AdamW(model.named_parameters(), lr=cfg.train.lr,
                weight_decay=cfg.train.weight_decay)
    rng = np.random.default_rng(cfg.train.seed)

    pairs = sum(len(s) - 1 for s in dataset)
    steps_per_epoch = max(1, math.ceil(pairs / cfg.train.batch))
    max_steps = cfg.train.max_steps or None

    trace_path = out / "trace.csv"
    step = 0
    t0 = time.time()
    with open(trace_path, "w") as trace:
        trace.write("step,loss\n")
        done = False
        for epoch in range(cfg.train.epochs):
            for _ in range(steps_per_epoch):
                samples = sample_batch(dataset, cfg.train.batch, rng)
                batch = model.batch_arrays(samples)
                gts = [s.gt for s in samples]
                opt.zero_grad()
                loss, _ = model.loss(batch, gts)
                val = float(loss.data)
                if not np.isfinite(val):
                    raise ContractError(f"train: non-finite loss at step {step}")
                backward(loss)
                opt.step()
                step += 1
                trace.write(f"{step},{val!r}\n")
                if max_steps and step >= max_steps:
                    done = True
                    break
            save_checkpoint(out / f"epoch_{epoch:04d}", model.state_arrays())
            if done:
                break
    save_checkpoint(out / "final", model.state_arrays())
    log(f"trained {step} steps in {time.time() - t0:.1f}s -> {out / 'final'}")
    return out / "final"
