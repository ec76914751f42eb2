"""Mask generation over token sequences and Gaussian mask filling.

Three schemes produce a :class:`MaskPlan` (the masked index set plus its
contiguous chunks):

* ``probabilistic`` -- every token independently starts a run of
  ``mask_len`` masked tokens with probability ``p``; overlapping runs merge
  and runs are cut at the sequence end.
* ``systematic`` -- exactly ``round(rate * N)`` tokens in exactly ``chunks``
  non-adjacent chunks whose lengths differ by at most one.
* ``span`` -- a single chunk of ``span`` tokens at a uniform start.

:func:`apply_mask` replaces masked feature columns with fresh draws from a
zero-mean normal with standard deviation ``MASK_STD``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from maeeg.core.ops import masked_fill
from maeeg.core.rng import Rng
from maeeg.core.tensor import Tensor
from maeeg.errors import ConfigError, ContractError

# N(0, sqrt(1/64)) read as a standard deviation of 0.125
MASK_STD = math.sqrt(1.0 / 64.0)

SCHEMES = ("probabilistic", "systematic", "span")


@dataclass(frozen=True)
class MaskSpec:
    scheme: str
    p: float | None = None
    mask_len: int | None = None
    rate: float | None = None
    chunks: int | None = None
    span: int | None = None

    def __post_init__(self):
        required = {
            "probabilistic": ("p", "mask_len"),
            "systematic": ("rate", "chunks"),
            "span": ("span",),
        }
        if self.scheme not in required:
            raise ConfigError(f"unknown mask scheme {self.scheme!r}; expected one of {SCHEMES}")
        fields_set = {f for f in ("p", "mask_len", "rate", "chunks", "span") if getattr(self, f) is not None}
        if fields_set != set(required[self.scheme]):
            raise ConfigError(
                f"{self.scheme} mask needs exactly {required[self.scheme]}, got {sorted(fields_set)}"
            )
        if self.scheme == "probabilistic":
            if not 0.0 <= self.p <= 1.0:
                raise ConfigError(f"mask probability must lie in [0, 1], got {self.p}")
            if self.mask_len < 1:
                raise ConfigError(f"mask_len must be >= 1, got {self.mask_len}")
        elif self.scheme == "systematic":
            if not 0.0 < self.rate < 1.0:
                raise ConfigError(f"mask rate must lie in (0, 1), got {self.rate}")
            if self.chunks < 1:
                raise ConfigError(f"mask chunks must be >= 1, got {self.chunks}")
        elif self.span < 1:
            raise ConfigError(f"mask span must be >= 1, got {self.span}")

    @classmethod
    def probabilistic(cls, p: float = 0.065, mask_len: int = 10) -> "MaskSpec":
        return cls("probabilistic", p=p, mask_len=mask_len)

    @classmethod
    def systematic(cls, rate: float, chunks: int) -> "MaskSpec":
        return cls("systematic", rate=rate, chunks=chunks)

    @classmethod
    def single_span(cls, span: int) -> "MaskSpec":
        return cls("span", span=span)

    def params(self) -> dict:
        return {k: getattr(self, k) for k in ("p", "mask_len", "rate", "chunks", "span")
                if getattr(self, k) is not None}

    def check_feasible(self, n_tokens: int):
        """Raise ConfigError if this spec cannot produce a plan over ``n_tokens``."""
        if self.scheme == "systematic":
            _systematic_counts(n_tokens, self.rate, self.chunks)
        elif self.scheme == "span" and self.span > n_tokens:
            raise ConfigError(f"mask span {self.span} exceeds sequence length {n_tokens}")


@dataclass
class MaskPlan:
    """Masked token indices ``I_m`` over a sequence of ``n_tokens``."""

    n_tokens: int
    indices: np.ndarray
    chunks: list = field(default_factory=list)
    spec: MaskSpec | None = None

    def __post_init__(self):
        self.indices = np.asarray(self.indices, dtype=np.int64)

    @property
    def size(self) -> int:
        return int(self.indices.size)

    def as_bool(self) -> np.ndarray:
        mask = np.zeros(self.n_tokens, dtype=bool)
        mask[self.indices] = True
        return mask

    def csv_row(self) -> dict:
        spec = self.spec
        return {
            "scheme": spec.scheme if spec else "",
            "n_tokens": self.n_tokens,
            "params": ";".join(f"{k}={v}" for k, v in (spec.params() if spec else {}).items()),
            "masked": self.size,
            "chunks": " ".join(f"{s}:{n}" for s, n in self.chunks),
        }


def _chunks_to_plan(n_tokens: int, chunks, spec) -> MaskPlan:
    chunks = sorted((int(s), int(n)) for s, n in chunks)
    if chunks:
        indices = np.concatenate([np.arange(s, s + n) for s, n in chunks])
    else:
        indices = np.zeros(0, dtype=np.int64)
    return MaskPlan(n_tokens, indices, chunks, spec)


def _runs(mask: np.ndarray):
    padded = np.concatenate([[False], mask, [False]])
    edges = np.flatnonzero(padded[1:] != padded[:-1])
    return [(int(s), int(e - s)) for s, e in zip(edges[::2], edges[1::2])]


def _systematic_counts(n_tokens: int, rate: float, chunks: int):
    masked = round(rate * n_tokens)  # round-half-to-even
    if masked < chunks or masked + chunks - 1 > n_tokens:
        raise ConfigError(
            f"infeasible systematic mask: m={masked} masked tokens in k={chunks} "
            f"non-adjacent chunks over N={n_tokens} tokens"
        )
    return masked


def plan_systematic(n_tokens: int, rate: float, chunks: int, rng: Rng) -> MaskPlan:
    """Exactly ``round(rate*N)`` masked tokens in ``chunks`` separated chunks.

    Chunk lengths are ``m // k`` or ``m // k + 1`` in random order.  The
    ``N - m - (k - 1)`` free tokens are split into ``k + 1`` gaps by a uniform
    stars-and-bars composition, then one extra token is added to every
    interior gap so that chunks never touch.
    """
    spec = MaskSpec.systematic(rate, chunks)
    masked = _systematic_counts(n_tokens, rate, chunks)
    base, extra = divmod(masked, chunks)
    lengths = np.full(chunks, base, dtype=np.int64)
    lengths[:extra] += 1
    lengths = lengths[rng.permutation(chunks)]

    free = n_tokens - masked - (chunks - 1)
    bars = np.sort(rng.choice(free + chunks, size=chunks, replace=False))
    gaps = np.diff(np.concatenate([[-1], bars, [free + chunks]])) - 1  # k+1 parts summing to free
    out = []
    pos = 0
    for i, length in enumerate(lengths):
        pos += int(gaps[i]) + (1 if i else 0)
        out.append((pos, int(length)))
        pos += int(length)
    return _chunks_to_plan(n_tokens, out, spec)


def plan_span(n_tokens: int, span: int, rng: Rng) -> MaskPlan:
    """One chunk of ``span`` tokens starting uniformly in ``[0, N - span]``."""
    spec = MaskSpec.single_span(span)
    spec.check_feasible(n_tokens)
    start = int(rng.integers(0, n_tokens - span + 1))
    return _chunks_to_plan(n_tokens, [(start, span)], spec)


def plan_probabilistic(n_tokens: int, p: float, mask_len: int, rng: Rng) -> MaskPlan:
    spec = MaskSpec.probabilistic(p, mask_len)
    starts = np.flatnonzero(rng.random(n_tokens) < p)
    mask = np.zeros(n_tokens, dtype=bool)
    for s in starts:
        mask[s : s + mask_len] = True
    return _chunks_to_plan(n_tokens, _runs(mask), spec)


def make_plan(spec: MaskSpec, n_tokens: int, rng: Rng) -> MaskPlan:
    if spec.scheme == "probabilistic":
        return plan_probabilistic(n_tokens, spec.p, spec.mask_len, rng)
    if spec.scheme == "systematic":
        return plan_systematic(n_tokens, spec.rate, spec.chunks, rng)
    return plan_span(n_tokens, spec.span, rng)


def empty_plan(n_tokens: int) -> MaskPlan:
    return MaskPlan(n_tokens, np.zeros(0, dtype=np.int64), [])


@dataclass
class MaskedSequence:
    q: Tensor
    plan: MaskPlan | list


def apply_mask(t: Tensor, plan, rng: Rng) -> MaskedSequence:
    """Replace masked token columns of ``t`` with N(0, MASK_STD) draws.

    ``t`` is ``(C, N)`` with a single plan, or ``(B, C, N)`` with a list of
    plans.  Draw order: for each sequence in batch order, one array of shape
    ``(|I_m|, C)`` (masked tokens ascending).  Unmasked columns are copied
    bit-exactly and masked columns pass no gradient back to ``t``.
    """
    batched = t.ndim == 3
    plans = plan if batched else [plan]
    if batched and len(plans) != t.shape[0]:
        raise ContractError(f"{len(plans)} plans for a batch of {t.shape[0]}")
    n_ch, n_tokens = t.shape[-2], t.shape[-1]
    mask = np.zeros((len(plans), n_ch, n_tokens), dtype=bool)
    fill = np.zeros((len(plans), n_ch, n_tokens), dtype=t.dtype)
    for b, pl in enumerate(plans):
        if pl.n_tokens != n_tokens:
            raise ContractError(f"mask plan covers {pl.n_tokens} tokens but sequence has {n_tokens}")
        if pl.size:
            draws = rng.normal(0.0, MASK_STD, size=(pl.size, n_ch))
            mask[b][:, pl.indices] = True
            fill[b][:, pl.indices] = draws.T
    if not batched:
        mask, fill = mask[0], fill[0]
    return MaskedSequence(masked_fill(t, mask, fill), plan)
