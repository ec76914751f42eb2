"""Shared test utilities: finite-difference gradient checks and tiny corpora."""

from __future__ import annotations

import numpy as np

from maeeg.core import Tensor


def numeric_grad(fn, arrays, index, eps=1e-6, entries=None):
    """Central-difference gradient of scalar ``fn(*arrays)`` w.r.t. ``arrays[index]``.

    ``entries`` restricts the check to a subset of flat positions; the other
    positions are returned as NaN.
    """
    x = arrays[index]
    grad = np.full(x.shape, np.nan)
    flat = x.reshape(-1)
    positions = range(flat.size) if entries is None else entries
    for i in positions:
        old = flat[i]
        flat[i] = old + eps
        plus = fn(*arrays)
        flat[i] = old - eps
        minus = fn(*arrays)
        flat[i] = old
        grad.reshape(-1)[i] = (plus - minus) / (2 * eps)
    return grad


def rel_error(analytic, numeric):
    keep = ~np.isnan(numeric)
    a, n = np.asarray(analytic, dtype=np.float64)[keep], numeric[keep]
    denom = max(np.linalg.norm(a), np.linalg.norm(n), 1e-12)
    return float(np.linalg.norm(a - n) / denom)


def check_op(op, *arrays, seed=0, dtype=np.float64, eps=1e-6):
    """Max relative error of ``op``'s analytic gradients against finite differences.

    The scalar objective is ``sum(op(*inputs) * R)`` for a fixed random ``R``
    so every output element contributes with a distinct weight.  Finite
    differences are always taken in float64; ``dtype`` sets the precision of
    the analytic pass.
    """
    arrays = [np.array(a, dtype=np.float64) for a in arrays]
    out_shape = op(*[Tensor(a) for a in arrays]).shape
    weights = np.random.default_rng(seed).normal(size=out_shape)

    def objective(*arrs):
        return float(np.sum(op(*[Tensor(a) for a in arrs]).data.astype(np.float64) * weights))

    inputs = [Tensor(a.astype(dtype), requires_grad=True) for a in arrays]
    out = op(*inputs)
    (out * Tensor(weights.astype(dtype))).sum().backward()
    worst = 0.0
    for i, t in enumerate(inputs):
        numeric = numeric_grad(objective, arrays, i, eps)
        worst = max(worst, rel_error(t.grad, numeric))
    return worst
