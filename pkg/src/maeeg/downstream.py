"""Five-class sleep-stage classification on top of pretrained encoders.

Two regimes mirror the two downstream analyses:

* ``frozen-probe-t`` -- the conv encoder is frozen and a linear layer reads
  the token-mean of its features ``t``;
* ``finetune-c`` -- encoder, transformer (up to the tap layer) and a linear
  layer reading the token-mean of the tapped context ``c`` are all trained.

``supervised-baseline`` is ``finetune-c`` starting from a random model.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from maeeg.core import Module, Parameter, Rng, Tensor, cross_entropy, linear, make_optimizer, no_grad, softmax
from maeeg.data import STAGES, Dataset, select_label_budget, stack
from maeeg.errors import ConfigError, DataError
from maeeg.model import ModelBundle
from maeeg.objectives import clip_gradients
from maeeg.report import RunReport

log = logging.getLogger(__name__)

REGIMES = ("frozen-probe-t", "finetune-c", "supervised-baseline")
N_CLASSES = len(STAGES)


@dataclass(frozen=True)
class DownstreamConfig:
    regime: str = "frozen-probe-t"
    tap_layer: int = 2
    pooling: str = "mean-over-tokens"
    classes: int = N_CLASSES
    epochs: int = 100
    validate_every: int = 2
    batch_size: int = 16
    lr: float | None = None  # regime default when None
    optimizer: str = "adam"
    grad_clip: float | None = 1.0
    label_fraction: float | None = None
    n_subjects: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.regime not in REGIMES:
            raise ConfigError(f"unknown regime {self.regime!r}; expected one of {REGIMES}")
        if self.pooling != "mean-over-tokens":
            raise ConfigError(f"unsupported pooling {self.pooling!r}")
        if self.classes != N_CLASSES:
            raise ConfigError(f"exactly {N_CLASSES} classes are supported")
        if self.epochs < 1 or self.validate_every < 1 or self.batch_size < 1:
            raise ConfigError("epochs, validate_every and batch_size must be >= 1")
        if self.label_fraction is not None and self.n_subjects is not None:
            raise ConfigError("give at most one of label_fraction and n_subjects")

    @property
    def learning_rate(self) -> float:
        if self.lr is not None:
            return self.lr
        return 5e-3 if self.regime == "frozen-probe-t" else 3e-4


@dataclass
class EvalMetrics:
    accuracy: float
    recall: list
    confusion: np.ndarray

    def row(self) -> dict:
        out = {"accuracy": self.accuracy}
        out.update({f"recall_{name}": r for name, r in zip(STAGES, self.recall)})
        return out


def metrics_from_predictions(labels, predictions, n_classes: int = N_CLASSES) -> EvalMetrics:
    labels = np.asarray(labels, dtype=np.int64)
    predictions = np.asarray(predictions, dtype=np.int64)
    if labels.size == 0:
        raise DataError("cannot evaluate on an empty dataset")
    confusion = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(confusion, (labels, predictions), 1)
    support = confusion.sum(axis=1)
    recall = [float(confusion[i, i] / support[i]) if support[i] else float("nan") for i in range(n_classes)]
    return EvalMetrics(float(np.trace(confusion) / labels.size), recall, confusion)


class DownstreamModel(Module):
    """Feature extractor plus a linear classification layer."""

    def __init__(self, bundle: ModelBundle, regime: str, tap_layer: int, rng: Rng):
        self.regime = regime
        self.tap_layer = tap_layer
        self.encoder = bundle.encoder
        self.transformer = None if regime == "frozen-probe-t" else bundle.transformer
        if self.transformer is not None and not 1 <= tap_layer <= self.transformer.cfg.layers:
            raise ConfigError(f"tap_layer {tap_layer} outside [1, {self.transformer.cfg.layers}]")
        in_dim = bundle.config.encoder.feature_dim if self.transformer is None else bundle.config.transformer.model_dim
        dtype = self.encoder.conv0_weight.dtype
        self.cls_weight = Parameter(rng.normal(0.0, 0.01, size=(N_CLASSES, in_dim)), dtype=dtype)
        self.cls_bias = Parameter(np.zeros(N_CLASSES), dtype=dtype)

    def classifier_parameters(self):
        return [self.cls_weight, self.cls_bias]

    def trainable_parameters(self):
        """Parameters that receive gradient updates in this regime."""
        if self.transformer is None:
            return self.classifier_parameters()
        tr = self.transformer
        params = self.encoder.parameters() + [tr.in_weight, tr.in_bias, tr.pos_weight, tr.pos_bias]
        for block in tr.blocks[: self.tap_layer]:
            params += block.parameters()
        return params + self.classifier_parameters()

    def features(self, x) -> Tensor:
        """Token-mean pooled features ``(B, D)``."""
        x = x if isinstance(x, Tensor) else Tensor(np.asarray(x))
        if x.ndim == 2:
            x = x.reshape(1, *x.shape)
        t = self.encoder(x)  # (B, 64, N)
        if self.transformer is None:
            return t.mean(axis=-1)
        ctx = self.transformer(t, upto=self.tap_layer)
        return ctx.layers[self.tap_layer - 1].mean(axis=1)

    def logits_from_features(self, feats: Tensor) -> Tensor:
        return linear(feats, self.cls_weight, self.cls_bias)

    def __call__(self, x) -> Tensor:
        return self.logits_from_features(self.features(x))


def _predict_features(model: DownstreamModel, signals: np.ndarray, batch_size: int = 32) -> np.ndarray:
    model.eval()
    out = []
    with no_grad():
        for start in range(0, len(signals), batch_size):
            out.append(model.features(signals[start : start + batch_size]).data)
    return np.concatenate(out)


def classify(model: DownstreamModel, record) -> np.ndarray:
    """Class probabilities for one record (wake, N1, N2, N3, REM)."""
    signal = getattr(record, "signal", record)
    model.eval()
    with no_grad():
        probs = softmax(model(np.asarray(signal)[None]), axis=-1).data[0]
    return probs.astype(np.float64)


def predict(model: DownstreamModel, ds: Dataset, batch_size: int = 32) -> np.ndarray:
    """Argmax class per record; ties go to the lowest class index."""
    signals, _ = stack(ds.records)
    feats = _predict_features(model, signals, batch_size)
    with no_grad():
        logits = model.logits_from_features(Tensor(feats)).data
    return np.argmax(logits, axis=1)


def evaluate(model: DownstreamModel, ds: Dataset) -> EvalMetrics:
    ds.require_nonempty("evaluation dataset")
    return metrics_from_predictions(ds.labels, predict(model, ds))


def _budget(train: Dataset, cfg: DownstreamConfig, rng: Rng) -> Dataset:
    if cfg.label_fraction is None and cfg.n_subjects is None:
        return train
    return select_label_budget(train, rng.child("budget"), cfg.label_fraction, cfg.n_subjects)


def _train_loop(model: DownstreamModel, train: Dataset, val: Dataset, test: Dataset,
                cfg: DownstreamConfig, params, step_fn, rng: Rng, val_predict=None):
    optimizer = make_optimizer(cfg.optimizer, params, cfg.learning_rate)
    report = RunReport()
    best_acc, best_epoch, best_state = -1.0, -1, None
    val_labels = val.labels
    for epoch in range(cfg.epochs):
        losses = []
        for step, batch_idx in enumerate(_index_batches(len(train), cfg.batch_size, rng.child("shuffle"), epoch)):
            loss = step_fn(batch_idx, rng.child("step", epoch, step))
            optimizer.zero_grad()
            loss.backward()
            if cfg.grad_clip:
                clip_gradients(params, cfg.grad_clip)
            optimizer.step()
            losses.append(loss.item())
        row = {"epoch": epoch + 1, "train_loss": float(np.mean(losses))}
        if (epoch + 1) % cfg.validate_every == 0:
            pred = val_predict() if val_predict is not None else predict(model, val)
            acc = float(np.mean(pred == val_labels))
            row["val_accuracy"] = acc
            report.validation_rows.append(row)
            if acc > best_acc:  # strict: ties keep the earliest epoch
                best_acc, best_epoch, best_state = acc, epoch + 1, model.state_dict()
        log.debug("downstream epoch %d: %s", epoch + 1, row)
    if best_state is not None:
        model.load_state_dict(best_state)
    model.eval()
    metrics = evaluate(model, test)
    report.metric_rows.append({"regime": cfg.regime, "best_epoch": best_epoch, "val_accuracy": best_acc,
                               "n_train": len(train), **metrics.row()})
    report.confusion = metrics.confusion.tolist()
    return metrics, report


def _index_batches(n: int, batch_size: int, rng: Rng, epoch: int):
    order = rng.child("epoch", epoch).permutation(n)
    for start in range(0, n, batch_size):
        yield order[start : start + batch_size]


def probe_train(bundle: ModelBundle, train: Dataset, val: Dataset, test: Dataset,
                cfg: DownstreamConfig = DownstreamConfig()):
    """Linear probe on token-mean conv features with the encoder frozen.

    The encoder runs once in eval mode to produce cached features; only the
    classification layer is optimised.  Returns ``(model, metrics, report)``.
    """
    if cfg.regime != "frozen-probe-t":
        raise ConfigError(f"probe_train needs regime frozen-probe-t, got {cfg.regime!r}")
    rng = Rng(cfg.seed).child("probe")
    train = _budget(train, cfg, rng)
    for name, part in (("train", train), ("validation", val), ("test", test)):
        part.require_nonempty(f"{name} split")
    model = DownstreamModel(bundle, cfg.regime, cfg.tap_layer, rng.child("classifier"))
    signals, labels = stack(train.records)
    feats = _predict_features(model, signals)

    val_feats = _predict_features(model, stack(val.records)[0])

    def step_fn(idx, _rng):
        logits = model.logits_from_features(Tensor(feats[idx]))
        return cross_entropy(logits, labels[idx])

    def val_predict():
        with no_grad():
            return np.argmax(model.logits_from_features(Tensor(val_feats)).data, axis=1)

    metrics, report = _train_loop(model, train, val, test, cfg, model.classifier_parameters(), step_fn, rng,
                                  val_predict)
    return model, metrics, report


def finetune_train(bundle: ModelBundle, train: Dataset, val: Dataset, test: Dataset,
                   cfg: DownstreamConfig = DownstreamConfig(regime="finetune-c")):
    """Fine-tune encoder + transformer (to the tap layer) + linear head on ``c``.

    No mask is applied.  Returns ``(model, metrics, report)``.
    """
    if cfg.regime not in ("finetune-c", "supervised-baseline"):
        raise ConfigError(f"finetune_train needs a fine-tuning regime, got {cfg.regime!r}")
    rng = Rng(cfg.seed).child("finetune")
    train = _budget(train, cfg, rng)
    for name, part in (("train", train), ("validation", val), ("test", test)):
        part.require_nonempty(f"{name} split")
    model = DownstreamModel(bundle, "finetune-c", cfg.tap_layer, rng.child("classifier"))
    signals, labels = stack(train.records)
    params = model.trainable_parameters()

    def step_fn(idx, step_rng):
        model.train(step_rng)
        return cross_entropy(model(signals[idx]), labels[idx])

    metrics, report = _train_loop(model, train, val, test, cfg, params, step_fn, rng)
    return model, metrics, report
