"""Finite-difference verification of backward passes.

``grad_check`` compares the autograd gradient of a scalar-valued tensor
function against central differences, coordinate by coordinate, and
returns the worst relative error. All checks run at float64.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .errors import ContractError, GradCheckError
from .tensor import Tensor, backward


def grad_check(fn: Callable[..., Tensor], inputs: Sequence[Tensor],
               eps: float = 1e-5, max_coords: int | None = None,
               seed: int = 0, atol: float = 1e-7) -> float:
    """Max relative error between analytic and numeric gradients.

    ``fn`` must be deterministic and return a 0-d tensor; ``inputs`` are
    float64 tensors with requires_grad set. When ``max_coords`` is given,
    at most that many coordinates per input are probed (chosen with a
    fixed seed), which keeps large composite blocks affordable.

    Relative error per coordinate is |a - n| / max(|a|, |n|, 1e-8); a
    coordinate whose absolute difference is within ``atol`` counts as
    exact. The absolute guard matters for structurally-zero gradients
    (e.g. attention key biases, which softmax shift-invariance cancels):
    there the central difference returns pure float64 roundoff of the
    loss value, and a relative quotient would be meaningless.
    """
    for t in inputs:
        if t.data.dtype != np.float64:
            raise ContractError("grad_check requires float64 inputs")
        if not t.requires_grad:
            raise ContractError("grad_check inputs must require grad")
        t.zero_grad()

    out = fn(*inputs)
    if out.data.ndim != 0:
        raise ContractError("grad_check: fn must return a scalar tensor")
    if not np.isfinite(out.data):
        raise GradCheckError("grad_check: non-finite forward output")
    backward(out)
    analytic = []
    for t in inputs:
        if t.grad is None:
            analytic.append(np.zeros_like(t.data))
        else:
            analytic.append(t.grad.copy())

    rng = np.random.default_rng(seed)
    worst = 0.0
    for ti, t in enumerate(inputs):
        flat = t.data.reshape(-1)
        n = flat.size
        if max_coords is not None and n > max_coords:
            coords = rng.choice(n, size=max_coords, replace=False)
        else:
            coords = range(n)
        ana = analytic[ti].reshape(-1)
        for j in coords:
            orig = flat[j]
            flat[j] = orig + eps
            fp = float(fn(*inputs).data)
            flat[j] = orig - eps
            fm = float(fn(*inputs).data)
            flat[j] = orig
            if not (np.isfinite(fp) and np.isfinite(fm)):
                raise GradCheckError(
                    f"grad_check: non-finite output at input {ti} coordinate {j}"
                )
            num = (fp - fm) / (2.0 * eps)
            diff = abs(num - ana[j])
            if diff <= atol:
                continue
            err = diff / max(abs(num), abs(ana[j]), 1e-8)
            worst = max(worst, err)
    return worst
