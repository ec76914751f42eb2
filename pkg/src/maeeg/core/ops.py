"""Differentiable neural operators.

Each operator computes its forward pass with numpy and registers a fused
backward closure, which keeps the graph small enough for desk-scale training.
Shapes follow the channel-major convention used across the package:
``conv1d`` and ``group_norm`` take ``(C, L)`` or ``(B, C, L)``; ``linear``,
``layer_norm`` and ``softmax`` act on the last axis.
"""

from __future__ import annotations

import math

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from maeeg.core.rng import Rng
from maeeg.core.tensor import Tensor, unbroadcast
from maeeg.errors import ConfigError, ContractError, DataError, DimensionError, InputTooShortError

NORM_EPS = 1e-5
COSINE_EPS = 1e-8

# tanh approximation of GELU: 0.5 x (1 + tanh(sqrt(2/pi) (x + 0.044715 x^3)))
GELU_C = math.sqrt(2.0 / math.pi)
GELU_A = 0.044715


def _t(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def matmul(a, b) -> Tensor:
    """Batched matrix product ``a @ b`` with broadcasting over leading axes."""
    a, b = _t(a), _t(b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise DimensionError(f"matmul shape mismatch: {a.shape} @ {b.shape}")
    A, B = a.data, b.data

    def backward(g):
        da = unbroadcast(g @ np.swapaxes(B, -1, -2), A.shape)
        db = unbroadcast(np.swapaxes(A, -1, -2) @ g, B.shape)
        return da, db

    return Tensor._from_op(A @ B, (a, b), backward)


def linear(x, weight, bias=None) -> Tensor:
    """``x @ weight.T + bias`` over the last axis of ``x``.

    ``weight`` is ``(out, in)``.
    """
    x = _t(x)
    if x.shape[-1] != weight.shape[1]:
        raise DimensionError(f"linear: input {x.shape} vs weight {weight.shape}")
    X, W = x.data, weight.data
    out = X @ W.T
    if bias is not None:
        out = out + bias.data

    def backward(g):
        g2 = g.reshape(-1, g.shape[-1])
        dx = g @ W
        dw = g2.T @ X.reshape(-1, X.shape[-1])
        db = g2.sum(axis=0) if bias is not None else None
        return (dx, dw, db) if bias is not None else (dx, dw)

    parents = (x, weight, bias) if bias is not None else (x, weight)
    return Tensor._from_op(out, parents, backward)


def conv1d(x, weight, bias=None, stride: int = 1, padding: int = 0, groups: int = 1) -> Tensor:
    """1-D cross-correlation.

    ``x`` is ``(C_in, L)`` or ``(B, C_in, L)``; ``weight`` is
    ``(C_out, C_in // groups, K)``.  Output length is
    ``floor((L + 2*padding - K) / stride) + 1``.
    """
    x = _t(x)
    unbatched = x.ndim == 2
    X = x.data[None] if unbatched else x.data
    if X.ndim != 3:
        raise DimensionError(f"conv1d expects (C, L) or (B, C, L), got {x.shape}")
    W = weight.data
    c_out, c_in_g, k = W.shape
    b_sz, c_in, length = X.shape
    if stride < 1:
        raise ConfigError(f"stride must be positive, got {stride}")
    if c_in % groups or c_out % groups or c_in // groups != c_in_g:
        raise DimensionError(f"conv1d: input {x.shape} incompatible with weight {W.shape}, groups={groups}")
    if padding:
        X = np.pad(X, ((0, 0), (0, 0), (padding, padding)))
    padded_len = X.shape[2]
    if padded_len < k:
        raise InputTooShortError(length, k - 2 * padding)
    l_out = (padded_len - k) // stride + 1
    c_out_g = c_out // groups

    # (B, C_in, L_out, K) -> (B, G, L_out, C_in_g * K)
    win = sliding_window_view(X, k, axis=2)[:, :, : (l_out - 1) * stride + 1 : stride]
    cols = win.reshape(b_sz, groups, c_in_g, l_out, k).transpose(0, 1, 3, 2, 4)
    cols = np.ascontiguousarray(cols).reshape(b_sz, groups, l_out, c_in_g * k)
    wg = W.reshape(groups, c_out_g, c_in_g * k)
    out = cols @ wg.transpose(0, 2, 1)[None]  # (B, G, L_out, C_out_g)
    out = out.transpose(0, 1, 3, 2).reshape(b_sz, c_out, l_out)
    if bias is not None:
        out = out + bias.data[None, :, None]
    if unbatched:
        out = out[0]

    def backward(g):
        gb = g[None] if unbatched else g
        gg = gb.reshape(b_sz, groups, c_out_g, l_out)  # (B, G, C_out_g, L_out)
        dw = (gg.transpose(1, 2, 0, 3).reshape(groups, c_out_g, b_sz * l_out)
              @ cols.transpose(1, 0, 2, 3).reshape(groups, b_sz * l_out, c_in_g * k)).reshape(W.shape)
        dcols = (gg.transpose(0, 1, 3, 2) @ wg[None])  # (B, G, L_out, C_in_g*K)
        dcols = dcols.reshape(b_sz, groups, l_out, c_in_g, k).transpose(0, 1, 3, 2, 4)
        dcols = dcols.reshape(b_sz, c_in, l_out, k)
        dx = np.zeros((b_sz, c_in, padded_len), dtype=X.dtype)
        for j in range(k):
            dx[:, :, j : j + (l_out - 1) * stride + 1 : stride] += dcols[:, :, :, j]
        if padding:
            dx = dx[:, :, padding:-padding]
        if unbatched:
            dx = dx[0]
        grads = [dx, dw]
        if bias is not None:
            grads.append(gb.sum(axis=(0, 2)))
        return tuple(grads)

    parents = (x, weight) if bias is None else (x, weight, bias)
    return Tensor._from_op(out, parents, backward)


def conv_output_length(length: int, kernel: int, stride: int, padding: int = 0) -> int:
    return (length + 2 * padding - kernel) // stride + 1


def gelu(x) -> Tensor:
    """GELU, tanh approximation (see ``GELU_C`` / ``GELU_A``)."""
    x = _t(x)
    a = x.data
    sq = a * a
    th = np.tanh(a * (GELU_C + GELU_C * GELU_A * sq))
    half = 0.5 * (1.0 + th)
    out = a * half

    def backward(g):
        d_inner = GELU_C + (3.0 * GELU_C * GELU_A) * sq
        return (g * (half + 0.5 * a * (1.0 - th * th) * d_inner),)

    return Tensor._from_op(out, (x,), backward)


def _normalize(a: np.ndarray, axes: tuple):
    mean = a.mean(axis=axes, keepdims=True, dtype=np.float64)
    centered = a - mean.astype(a.dtype)
    var = (centered.astype(np.float64) ** 2).mean(axis=axes, keepdims=True)
    inv = (1.0 / np.sqrt(var + NORM_EPS)).astype(a.dtype)
    return centered * inv, inv


def _normalize_backward(g_hat: np.ndarray, x_hat: np.ndarray, inv: np.ndarray, axes: tuple):
    m1 = g_hat.mean(axis=axes, keepdims=True, dtype=np.float64).astype(g_hat.dtype)
    m2 = (g_hat * x_hat).mean(axis=axes, keepdims=True, dtype=np.float64).astype(g_hat.dtype)
    return inv * (g_hat - m1 - x_hat * m2)


def group_norm(x, groups: int, gain, bias) -> Tensor:
    """Group normalization over ``(C, L)`` or ``(B, C, L)`` inputs."""
    x = _t(x)
    unbatched = x.ndim == 2
    X = x.data[None] if unbatched else x.data
    b_sz, c, length = X.shape
    if groups < 1 or c % groups:
        raise ConfigError(f"group_norm: {c} channels not divisible by {groups} groups")
    grouped = X.reshape(b_sz, groups, -1)
    x_hat, inv = _normalize(grouped, (2,))
    x_hat = x_hat.reshape(b_sz, c, length)
    out = x_hat * gain.data[None, :, None] + bias.data[None, :, None]
    if unbatched:
        out = out[0]

    def backward(g):
        gb = g[None] if unbatched else g
        d_gain = (gb * x_hat).sum(axis=(0, 2))
        d_bias = gb.sum(axis=(0, 2))
        g_hat = (gb * gain.data[None, :, None]).reshape(b_sz, groups, -1)
        dx = _normalize_backward(g_hat, x_hat.reshape(b_sz, groups, -1), inv, (2,))
        dx = dx.reshape(b_sz, c, length)
        return (dx[0] if unbatched else dx), d_gain, d_bias

    return Tensor._from_op(out, (x, gain, bias), backward)


def layer_norm(x, gain, bias) -> Tensor:
    """Layer normalization over the last axis."""
    x = _t(x)
    x_hat, inv = _normalize(x.data, (-1,))
    out = x_hat * gain.data + bias.data

    def backward(g):
        lead = tuple(range(g.ndim - 1))
        d_gain = (g * x_hat).sum(axis=lead)
        d_bias = g.sum(axis=lead)
        dx = _normalize_backward(g * gain.data, x_hat, inv, (-1,))
        return dx, d_gain, d_bias

    return Tensor._from_op(out, (x, gain, bias), backward)


def softmax(x, axis: int = -1) -> Tensor:
    x = _t(x)
    a = x.data
    e = np.exp(a - a.max(axis=axis, keepdims=True))
    out = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        return (out * (g - (g * out).sum(axis=axis, keepdims=True)),)

    return Tensor._from_op(out, (x,), backward)


def log_softmax(x, axis: int = -1) -> Tensor:
    x = _t(x)
    a = x.data
    shifted = a - a.max(axis=axis, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
    out = shifted - lse
    probs = np.exp(out)

    def backward(g):
        return (g - probs * g.sum(axis=axis, keepdims=True),)

    return Tensor._from_op(out, (x,), backward)


def dropout(x, p: float, training: bool, rng: Rng | None = None) -> Tensor:
    """Inverted dropout: identity in eval mode, keep-scale ``1/(1-p)`` in train."""
    if not 0.0 <= p < 1.0:
        raise ConfigError(f"dropout probability must lie in [0, 1), got {p}")
    x = _t(x)
    if not training or p == 0.0:
        return x
    if rng is None:
        raise ContractError("dropout in training mode needs an rng")
    keep = (rng.random(x.shape, dtype=np.float32) >= p).astype(x.dtype) * x.dtype.type(1.0 / (1.0 - p))
    return Tensor._from_op(x.data * keep, (x,), lambda g: (g * keep,))


def cosine_similarity(a, b, axis=None) -> Tensor:
    """Cosine similarity with each norm clamped below at ``COSINE_EPS``.

    With ``axis=None`` both inputs are flattened and a scalar is returned.
    Otherwise the similarity is taken along ``axis`` after broadcasting.
    """
    a, b = _t(a), _t(b)
    A, B = a.data, b.data
    if axis is None:
        if A.size != B.size:
            raise DimensionError(f"cosine_similarity length mismatch: {A.shape} vs {B.shape}")
        A2, B2 = A.reshape(-1).astype(np.float64), B.reshape(-1).astype(np.float64)
        red = None
    else:
        try:
            np.broadcast_shapes(A.shape, B.shape)
        except ValueError as exc:
            raise DimensionError(f"cosine_similarity shape mismatch: {A.shape} vs {B.shape}") from exc
        A2, B2 = A.astype(np.float64), B.astype(np.float64)
        red = axis
    dot = np.sum(A2 * B2, axis=red, keepdims=red is not None)
    na_raw = np.sqrt(np.sum(A2 * A2, axis=red, keepdims=red is not None))
    nb_raw = np.sqrt(np.sum(B2 * B2, axis=red, keepdims=red is not None))
    na = np.maximum(na_raw, COSINE_EPS)
    nb = np.maximum(nb_raw, COSINE_EPS)
    cos = dot / (na * nb)
    out = cos if red is None else np.squeeze(cos, axis=red)
    dtype = np.result_type(A.dtype, B.dtype)

    def backward(g):
        g = np.asarray(g, dtype=np.float64)
        if red is not None:
            g = np.expand_dims(g, red)
        # a clamped norm is constant, so its term drops out of the derivative
        ca = np.where(na_raw > COSINE_EPS, cos / (na * na), 0.0)
        cb = np.where(nb_raw > COSINE_EPS, cos / (nb * nb), 0.0)
        da = g * (B2 / (na * nb) - ca * A2)
        db = g * (A2 / (na * nb) - cb * B2)
        if red is None:
            return da.reshape(A.shape).astype(A.dtype), db.reshape(B.shape).astype(B.dtype)
        return unbroadcast(da, A.shape).astype(A.dtype), unbroadcast(db, B.shape).astype(B.dtype)

    return Tensor._from_op(np.asarray(out, dtype=dtype), (a, b), backward)


def cross_entropy(logits, labels) -> Tensor:
    """Mean negative log-likelihood of ``labels`` under ``softmax(logits)``."""
    logits = _t(logits)
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    n, n_classes = logits.shape
    if labels.shape[0] != n:
        raise DimensionError(f"cross_entropy: {n} rows of logits but {labels.shape[0]} labels")
    if labels.size and (labels.min() < 0 or labels.max() >= n_classes):
        raise DataError(f"labels must lie in [0, {n_classes - 1}], got {sorted(set(labels.tolist()))}")
    a = logits.data.astype(np.float64)
    shifted = a - a.max(axis=1, keepdims=True)
    logp = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    loss = -logp[np.arange(n), labels].mean()

    def backward(g):
        grad = np.exp(logp)
        grad[np.arange(n), labels] -= 1.0
        return ((grad * (float(g) / n)).astype(logits.dtype),)

    return Tensor._from_op(np.asarray(loss, dtype=logits.dtype), (logits,), backward)


def masked_fill(x, mask: np.ndarray, fill: np.ndarray) -> Tensor:
    """``where(mask, fill, x)``; no gradient reaches ``x`` where ``mask`` holds."""
    x = _t(x)
    mask = np.broadcast_to(np.asarray(mask, dtype=bool), x.shape)
    out = np.where(mask, np.asarray(fill, dtype=x.dtype), x.data)
    keep = ~mask
    return Tensor._from_op(out, (x,), lambda g: (g * keep,))


def concat(tensors, axis: int = 0) -> Tensor:
    tensors = [_t(t) for t in tensors]
    sizes = [t.shape[axis] for t in tensors]
    out = np.concatenate([t.data for t in tensors], axis=axis)
    bounds = np.cumsum(sizes)[:-1]

    def backward(g):
        return tuple(np.split(g, bounds, axis=axis))

    return Tensor._from_op(out, tuple(tensors), backward)
