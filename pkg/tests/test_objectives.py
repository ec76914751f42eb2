"""Reconstruction and contrastive losses, and the pretraining loop."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from maeeg.checkpoint import load_model
from maeeg.core import Rng, Tensor, no_grad
from maeeg.data import Dataset, EegRecord, SynthSpec, stack, synth_dataset
from maeeg.errors import ConfigError, DataError, DegenerateMaskError
from maeeg.masking import MaskPlan, MaskSpec, empty_plan, plan_span
from maeeg.model import build_model, tiny_config
from maeeg.objectives import (
    ContrastiveConfig,
    PretrainConfig,
    contrastive_loss,
    eval_loss,
    pretrain_run,
    reconstruction_loss,
    ssl_forward,
)


def _x(seed=0, shape=(6, 960)):
    return np.random.default_rng(seed).normal(size=shape)


def test_reconstruction_loss_anchor_values():
    x = _x()
    assert reconstruction_loss(Tensor(x), x).item() == pytest.approx(0.0, abs=1e-12)
    assert reconstruction_loss(Tensor(-x), x).item() == pytest.approx(2.0, abs=1e-12)
    assert reconstruction_loss(Tensor(np.zeros_like(x)), x).item() == 1.0
    assert reconstruction_loss(Tensor(3.5 * x), x).item() == pytest.approx(0.0, abs=1e-12)


def test_reconstruction_loss_crops_target_and_batches():
    x = _x(shape=(2, 6, 1000))
    x_hat = Tensor(x[..., :960].copy())
    x_hat.data[1] *= -1
    # sample 0 reconstructs perfectly, sample 1 is inverted: mean of 0 and 2
    assert reconstruction_loss(x_hat, x).item() == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_reconstruction_loss_range(seed):
    rng = np.random.default_rng(seed)
    loss = reconstruction_loss(Tensor(rng.normal(size=(6, 96))), rng.normal(size=(6, 96))).item()
    assert 0.0 <= loss <= 2.0


def _full_plan(n):
    return MaskPlan(n, np.arange(n), [(0, n)])


def test_contrastive_loss_uniform_scores_give_log_k_plus_one():
    k = 20
    n = k + 1
    t = np.tile(np.random.default_rng(0).normal(size=(64, 1)), (1, n))
    c = np.random.default_rng(1).normal(size=(64, n))
    loss = contrastive_loss(Tensor(c), Tensor(t), _full_plan(n), ContrastiveConfig(0.1, k), Rng(0)).item()
    assert loss == pytest.approx(math.log(k + 1), rel=1e-9)


def test_contrastive_loss_orthogonal_distractors_closed_form():
    k = 20
    n = k + 1
    t = np.eye(64)[:, :n]
    loss = contrastive_loss(Tensor(t.copy()), Tensor(t), _full_plan(n), ContrastiveConfig(0.1, k), Rng(0)).item()
    expected = math.log1p(k * math.exp(-10.0))
    assert loss == pytest.approx(expected, rel=1e-9)
    assert loss == pytest.approx(k * math.exp(-10.0), rel=1e-3)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), scale=st.floats(0.01, 100.0))
def test_contrastive_loss_nonnegative_and_scale_invariant(seed, scale):
    rng = np.random.default_rng(seed)
    c, t = rng.normal(size=(16, 30)), rng.normal(size=(16, 30))
    plan = plan_span(30, 12, Rng(seed))
    cfg = ContrastiveConfig(0.1, 5)
    base = contrastive_loss(Tensor(c), Tensor(t), plan, cfg, Rng(7)).item()
    scaled = contrastive_loss(Tensor(scale * c), Tensor(scale * t), plan, cfg, Rng(7)).item()
    assert base >= 0.0
    assert scaled == pytest.approx(base, rel=1e-9, abs=1e-12)


def test_contrastive_loss_rejects_degenerate_masks():
    c = Tensor(np.ones((8, 10)))
    with pytest.raises(DegenerateMaskError):
        contrastive_loss(c, c, plan_span(10, 1, Rng(0)), ContrastiveConfig(), Rng(0))
    with pytest.raises(DegenerateMaskError):
        contrastive_loss(Tensor(np.ones((2, 8, 10))), Tensor(np.ones((2, 8, 10))),
                         [empty_plan(10), plan_span(10, 1, Rng(0))], ContrastiveConfig(), Rng(0))


def test_contrastive_config_validation():
    with pytest.raises(ConfigError):
        ContrastiveConfig(temperature=0.0)
    with pytest.raises(ConfigError):
        ContrastiveConfig(negatives=0)


def test_pretrain_config_refuses_structured_masks_on_30s_samples():
    with pytest.raises(ConfigError, match="100 s"):
        PretrainConfig(sample_length=30, mask=MaskSpec.systematic(0.5, 2))
    with pytest.raises(ConfigError):
        PretrainConfig(sample_length=30, mask=MaskSpec.single_span(10))
    PretrainConfig(sample_length=100, mask=MaskSpec.systematic(0.5, 2))
    with pytest.raises(ConfigError):
        PretrainConfig(sample_length=60)
    with pytest.raises(ConfigError):
        PretrainConfig(mode="supervised-baseline")


@pytest.fixture(scope="module")
def small_corpus():
    return synth_dataset(SynthSpec(records_per_class=2, length=3000))


@pytest.mark.parametrize("mode", ["maeeg", "bendr"])
def test_gradients_are_finite(mode, small_corpus):
    model = build_model(tiny_config(mode), seed=0)
    signals, _ = stack(small_corpus.records[:4])
    model.train(Rng(1))
    loss, _ = ssl_forward(model, signals, MaskSpec.probabilistic(), Rng(2))
    loss.backward()
    for name, p in model.named_parameters().items():
        assert np.all(np.isfinite(p.grad)), name


@pytest.mark.parametrize("mode", ["maeeg", "bendr"])
def test_first_epoch_loss_exceeds_last(mode, small_corpus):
    cfg = PretrainConfig(mode=mode, epochs=6, batch_size=5, lr=1e-2)
    _, report = pretrain_run(small_corpus, cfg, tiny_config(mode))
    means = [row["mean_loss"] for row in report.metric_rows]
    assert means[0] > means[-1]


def test_pretraining_is_deterministic_and_logs_every_step(small_corpus):
    cfg = PretrainConfig(mode="maeeg", epochs=2, batch_size=4, lr=1e-3, seed=5)
    _, a = pretrain_run(small_corpus, cfg, tiny_config())
    _, b = pretrain_run(small_corpus, cfg, tiny_config())
    assert [r["loss"] for r in a.loss_rows] == [r["loss"] for r in b.loss_rows]
    assert len(a.loss_rows) == 2 * math.ceil(len(small_corpus) / 4)
    assert a.loss_rows[0]["scheme"] == "probabilistic"
    _, c = pretrain_run(small_corpus, PretrainConfig(mode="maeeg", epochs=2, batch_size=4, lr=1e-3, seed=6),
                        tiny_config())
    assert [r["loss"] for r in a.loss_rows] != [r["loss"] for r in c.loss_rows]


def test_checkpoint_reload_reproduces_eval_loss(small_corpus, tmp_path):
    cfg = PretrainConfig(mode="bendr", epochs=1, batch_size=5, lr=1e-3)
    model, _ = pretrain_run(small_corpus, cfg, tiny_config("bendr"), out_dir=tmp_path)
    loaded, meta = load_model(tmp_path / "final.maec")
    signals, _ = stack(small_corpus.records)
    assert eval_loss(model, signals, cfg, Rng(3)) == eval_loss(loaded, signals, cfg, Rng(3))
    assert meta["pretrain"]["mode"] == "bendr"
    assert (tmp_path / "best.maec").exists()


def test_pretraining_data_checks(small_corpus):
    with pytest.raises(DataError):
        pretrain_run(Dataset([]), PretrainConfig(), tiny_config())
    with pytest.raises(DataError, match="samples"):
        pretrain_run(small_corpus, PretrainConfig(sample_length=100, mask=MaskSpec.systematic(0.5, 1)),
                     tiny_config())


def test_infeasible_mask_is_rejected_before_training():
    ds = synth_dataset(SynthSpec(records_per_class=1, length=10000))
    with pytest.raises(ConfigError):
        pretrain_run(ds, PretrainConfig(sample_length=100, mask=MaskSpec.systematic(0.1, 20)), tiny_config())


def _lowpass(x, cutoff=1.0, rate=100):
    spec = np.fft.rfft(x, axis=-1)
    spec[..., np.fft.rfftfreq(x.shape[-1], 1 / rate) > cutoff] = 0
    return np.fft.irfft(spec, n=x.shape[-1], axis=-1)


def _corr(a, b):
    a, b = a - a.mean(), b - b.mean()
    return float((a * b).sum() / np.sqrt((a * a).sum() * (b * b).sum()))


def test_reconstruction_tracks_slow_structure():
    """Slow oscillations under white noise: x_hat follows the sub-1 Hz part, not the residual."""
    rng = np.random.default_rng(0)
    time = np.arange(3000) / 100
    records = []
    for i in range(24):
        freq, phase = rng.uniform(0.3, 0.8, size=(6, 1)), rng.uniform(0, 2 * np.pi, size=(6, 1))
        x = np.sin(2 * np.pi * freq * time + phase) + rng.normal(size=(6, 3000))
        records.append(EegRecord(x.astype(np.float32), i % 5, i % 3, i))
    ds = Dataset(records)
    model, _ = pretrain_run(ds, PretrainConfig(mode="maeeg", epochs=20, batch_size=8, lr=1e-2), tiny_config())
    signals, _ = stack(ds.records)
    with no_grad():
        x_hat = model.head(model.transformer(model.encoder(Tensor(signals)))).data.astype(np.float64)
    x = signals[..., : x_hat.shape[-1]].astype(np.float64)
    low = _lowpass(x)
    low_corr = np.mean([_corr(x_hat[i], low[i]) for i in range(len(ds))])
    high_corr = np.mean([_corr(x_hat[i], x[i] - low[i]) for i in range(len(ds))])
    assert low_corr > high_corr
