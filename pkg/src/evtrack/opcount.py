"""Multiply-add accounting for cost assertions.

A counter is activated with ``count_macs()``; while active, matmul and
conv2d report their MAC counts under the innermost label pushed with
``label(...)`` ("default" otherwise). Used to verify the attention-cost
reduction from key/value downsampling and kept cheap enough to leave
compiled in.
"""

from __future__ import annotations

from contextlib import contextmanager

_active: list["MacCounter"] = []
_labels: list[str] = []


class MacCounter:
    def __init__(self):
        self.counts: dict[str, int] = {}

    def add(self, label: str, n: int) -> None:
        self.counts[label] = self.counts.get(label, 0) + int(n)

    def total(self) -> int:
        return sum(self.counts.values())

    def __getitem__(self, label: str) -> int:
        return self.counts.get(label, 0)


@contextmanager
def count_macs():
    c = MacCounter()
    _active.append(c)
    try:
        yield c
    finally:
        _active.remove(c)


@contextmanager
def label(name: str):
    _labels.append(name)
    try:
        yield
    finally:
        _labels.pop()


def _current_label() -> str:
    return _labels[-1] if _labels else "default"


def record_macs(kind: str, n: int) -> None:
    if not _active:
        return
    lbl = _current_label()
    for c in _active:
        c.add(lbl, n)


def record_matmul(a_shape, b_shape, out_shape) -> None:
    if not _active:
        return
    m, k = a_shape[-2], a_shape[-1]
    n = b_shape[-1]
    batch = 1
    for d in out_shape[:-2]:
        batch *= d
    record_macs("matmul", batch * m * k * n)
