"""Self-supervised objectives and the pretraining loop.

MAEEG minimises ``1 - cos(x_hat, x)`` between the reconstructed and the input
signal.  BENDR contrasts projected context vectors against the convolved
features with an InfoNCE loss over masked positions.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from maeeg.checkpoint import save_model
from maeeg.core import Rng, Tensor, cosine_similarity, log_softmax, make_optimizer, no_grad
from maeeg.core.ops import concat
from maeeg.data import Dataset, batch_iter, stack
from maeeg.encoder import SAMPLE_RATE
from maeeg.errors import ConfigError, ContractError, DataError, DegenerateMaskError
from maeeg.masking import MaskPlan, MaskSpec, apply_mask, make_plan
from maeeg.model import ModelBundle, ModelConfig, build_model
from maeeg.report import RunReport

log = logging.getLogger(__name__)

SAMPLE_LENGTHS = (30, 100)


@dataclass(frozen=True)
class ContrastiveConfig:
    temperature: float = 0.1
    negatives: int = 20

    def __post_init__(self):
        if self.temperature <= 0:
            raise ConfigError(f"temperature must be positive, got {self.temperature}")
        if self.negatives < 1:
            raise ConfigError(f"negatives must be >= 1, got {self.negatives}")


@dataclass(frozen=True)
class PretrainConfig:
    mode: str = "maeeg"
    sample_length: int = 30  # seconds
    mask: MaskSpec = field(default_factory=MaskSpec.probabilistic)
    epochs: int = 10
    batch_size: int = 8
    lr: float = 5e-4
    optimizer: str = "adam"
    grad_clip: float | None = 1.0
    seed: int = 0
    contrastive: ContrastiveConfig = field(default_factory=ContrastiveConfig)

    def __post_init__(self):
        if self.mode not in ("maeeg", "bendr"):
            raise ConfigError(f"pretraining mode must be maeeg or bendr, got {self.mode!r}")
        if self.sample_length not in SAMPLE_LENGTHS:
            raise ConfigError(f"sample_length must be one of {SAMPLE_LENGTHS} seconds, got {self.sample_length}")
        if self.mask.scheme in ("systematic", "span") and self.sample_length != 100:
            raise ConfigError(
                f"{self.mask.scheme} masks need 100 s samples: 30 s samples do not have "
                "enough tokens to examine mask rate/chunk/span variations"
            )
        if self.epochs < 1 or self.batch_size < 1:
            raise ConfigError("epochs and batch_size must be >= 1")

    @property
    def n_samples(self) -> int:
        return self.sample_length * SAMPLE_RATE

    def params(self) -> dict:
        return {"mode": self.mode, "scheme": self.mask.scheme,
                **{k if k.startswith("mask_") else f"mask_{k}": v for k, v in self.mask.params().items()}}


# ----------------------------------------------------------------------
# losses


def align_target(x_hat: Tensor, x) -> Tensor:
    """First ``x_hat.shape[-1]`` samples of ``x`` (the conv stack drops a tail)."""
    x = x if isinstance(x, Tensor) else Tensor(x)
    length = x_hat.shape[-1]
    if x.shape[:-1] != x_hat.shape[:-1] or x.shape[-1] < length:
        raise ContractError(f"cannot align target {x.shape} to reconstruction {x_hat.shape}")
    if x.shape[-1] == length:
        return x
    return x[..., :length]


def reconstruction_loss(x_hat: Tensor, x) -> Tensor:
    """``1 - cos(x_hat, x)`` over flattened signals, averaged over the batch.

    ``x`` is cropped to the reconstructed length first.  Result lies in
    ``[0, 2]``; an all-zero reconstruction yields exactly 1.
    """
    target = align_target(x_hat, x)
    if x_hat.ndim == 2:
        return 1.0 - cosine_similarity(x_hat, target)
    b = x_hat.shape[0]
    cos = cosine_similarity(x_hat.reshape(b, -1), target.reshape(b, -1), axis=-1)
    return 1.0 - cos.mean()


def _sample_candidates(plan: MaskPlan, negatives: int, rng: Rng) -> np.ndarray:
    """``(A, K+1)`` token indices: the anchor followed by K distractors from I_m."""
    idx = plan.indices
    m = idx.size
    if m < 2:
        raise DegenerateMaskError(f"contrastive loss needs at least 2 masked tokens, got {m}")
    k = min(negatives, m - 1)
    keys = rng.random((m, m))
    keys[np.arange(m), np.arange(m)] = np.inf  # never draw the anchor itself
    order = np.argsort(keys, axis=1, kind="stable")[:, :k]
    return np.concatenate([idx[:, None], idx[order]], axis=1)


def _contrastive_terms(c: Tensor, t: Tensor, candidates: np.ndarray, temperature: float) -> Tensor:
    """Per-anchor InfoNCE terms for one ``(D, N)`` sequence pair."""
    anchors = candidates[:, 0]
    c_sel = c.T[anchors]  # (A, D)
    t_sel = t.T[candidates]  # (A, K+1, D)
    a, d = c_sel.shape
    sims = cosine_similarity(c_sel.reshape(a, 1, d), t_sel, axis=-1)  # (A, K+1)
    return -log_softmax(sims * (1.0 / temperature), axis=-1)[:, 0]


def contrastive_loss(c: Tensor, t, plan, cfg: ContrastiveConfig, rng: Rng) -> Tensor:
    """InfoNCE over masked positions.

    For each anchor ``i`` in ``I_m`` the positive is ``t_i`` and the
    distractors are ``t_j`` for up to ``cfg.negatives`` positions ``j`` drawn
    without replacement from ``I_m \\ {i}``.  Scores are cosine similarities
    divided by ``cfg.temperature``; the loss is the mean over all anchors.

    ``c`` and ``t`` are ``(D, N)`` with one plan or ``(B, D, N)`` with a list
    of plans.  In the batched form, sequences with fewer than two masked
    tokens contribute no anchors; if none qualifies a DegenerateMaskError is
    raised.
    """
    t = getattr(t, "t", t)
    if c.shape != t.shape:
        raise ContractError(f"context {c.shape} and features {t.shape} differ in shape")
    if c.ndim == 2:
        cand = _sample_candidates(plan, cfg.negatives, rng)
        return _contrastive_terms(c, t, cand, cfg.temperature).mean()
    terms = []
    for b, pl in enumerate(plan):
        if pl.size < 2:
            continue
        cand = _sample_candidates(pl, cfg.negatives, rng)
        terms.append(_contrastive_terms(c[b], t[b], cand, cfg.temperature))
    if not terms:
        raise DegenerateMaskError("no sequence in the batch has 2 or more masked tokens")
    return concat(terms).mean()


# ----------------------------------------------------------------------
# pretraining


def ssl_forward(model: ModelBundle, signals, mask: MaskSpec, rng: Rng,
                contrastive: ContrastiveConfig = ContrastiveConfig(), plans=None):
    """Encode, mask, contextualize, and score one batch; returns ``(loss, plans)``."""
    x = signals if isinstance(signals, Tensor) else Tensor(np.asarray(signals))
    t = model.encoder(x)
    n_tokens = t.shape[-1]
    if plans is None:
        plan_rng = rng.child("plan")
        plans = [make_plan(mask, n_tokens, plan_rng) for _ in range(t.shape[0])]
    q = apply_mask(t, plans, rng.child("fill"))
    ctx = model.transformer(q.q)
    if model.mode == "maeeg":
        loss = reconstruction_loss(model.head(ctx), x)
    elif model.mode == "bendr":
        loss = contrastive_loss(model.head(ctx), t, plans, contrastive, rng.child("negatives"))
    else:
        raise ConfigError(f"model mode {model.mode!r} has no self-supervised objective")
    return loss, plans


def clip_gradients(params, max_norm: float) -> float:
    total = math.sqrt(sum(float(np.sum(p.grad.astype(np.float64) ** 2)) for p in params))
    if total > max_norm:
        scale = max_norm / (total + 1e-12)
        for p in params:
            p.grad = p.grad * p.grad.dtype.type(scale)
    return total


def pretrain_step(model: ModelBundle, optimizer, signals, cfg: PretrainConfig, rng: Rng) -> float:
    """One optimisation step; returns the batch loss (NaN if the batch had no usable mask)."""
    if model.mode != cfg.mode:
        raise ConfigError(f"model mode {model.mode!r} does not match pretraining mode {cfg.mode!r}")
    model.train(rng.child("dropout"))
    try:
        loss, _ = ssl_forward(model, signals, cfg.mask, rng, cfg.contrastive)
    except DegenerateMaskError:
        log.debug("skipping step: no sequence had enough masked tokens")
        return float("nan")
    optimizer.zero_grad()
    loss.backward()
    if cfg.grad_clip:
        clip_gradients(optimizer.params, cfg.grad_clip)
    optimizer.step()
    return loss.item()


def eval_loss(model: ModelBundle, signals, cfg: PretrainConfig, rng: Rng) -> float:
    """SSL loss in eval mode (no dropout, no graph) under a seeded mask."""
    model.eval()
    with no_grad():
        loss, _ = ssl_forward(model, signals, cfg.mask, rng, cfg.contrastive)
    return loss.item()


def _check_dataset(ds: Dataset, cfg: PretrainConfig):
    ds.require_nonempty("pretraining dataset")
    bad = sorted({r.length for r in ds if r.length != cfg.n_samples})
    if bad:
        raise DataError(f"records must have {cfg.n_samples} samples for {cfg.sample_length} s pretraining; found {bad}")


def pretrain_run(ds: Dataset, cfg: PretrainConfig, model_config: ModelConfig | None = None,
                 model: ModelBundle | None = None, out_dir=None, max_steps: int | None = None):
    """Train a model with its self-supervised objective.

    Returns ``(model, report)``.  When ``out_dir`` is given, ``best.maec``
    (lowest epoch-mean loss) and ``final.maec`` checkpoints are written
    there.
    """
    _check_dataset(ds, cfg)
    if model is None:
        model_config = (model_config or ModelConfig()).with_mode(cfg.mode)
        model = build_model(model_config, cfg.seed)
    cfg.mask.check_feasible(_n_tokens(model, cfg))
    optimizer = make_optimizer(cfg.optimizer, model.parameters(), cfg.lr)
    rng = Rng(cfg.seed).child("pretrain")
    report = RunReport()
    out_dir = Path(out_dir) if out_dir is not None else None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
    best = math.inf
    step = 0
    for epoch in range(cfg.epochs):
        losses = []
        for batch in batch_iter(ds, cfg.batch_size, rng.child("shuffle"), epoch):
            signals, _ = stack(batch)
            loss = pretrain_step(model, optimizer, signals, cfg, rng.child("step", step))
            losses.append(loss)
            report.loss_rows.append({"step": step, "epoch": epoch, "loss": loss, **cfg.params()})
            step += 1
            if max_steps is not None and step >= max_steps:
                break
        mean = float(np.nanmean(losses)) if not all(math.isnan(v) for v in losses) else math.nan
        report.metric_rows.append({"epoch": epoch, "mean_loss": mean, **cfg.params()})
        log.info("epoch %d mean %s loss %.4f", epoch, cfg.mode, mean)
        if mean < best:
            best = mean
            if out_dir is not None:
                save_model(model, out_dir / "best.maec", {"epoch": epoch, "pretrain": cfg.params()})
        if max_steps is not None and step >= max_steps:
            break
    model.eval()
    if out_dir is not None:
        save_model(model, out_dir / "final.maec", {"epoch": cfg.epochs - 1, "pretrain": cfg.params()})
    return model, report


def _n_tokens(model: ModelBundle, cfg: PretrainConfig) -> int:
    from maeeg.encoder import token_length

    return token_length(cfg.n_samples, model.config.encoder)


def with_mask(cfg: PretrainConfig, mask: MaskSpec) -> PretrainConfig:
    return replace(cfg, mask=mask)
