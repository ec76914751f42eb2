"""End-to-end finite-difference checks on a 2-layer, width-8 model with N=5 tokens."""

import numpy as np
import pytest

from maeeg.core import Rng, no_grad
from maeeg.encoder import token_length
from maeeg.masking import MaskSpec, plan_span
from maeeg.model import build_model, tiny_config
from maeeg.objectives import ContrastiveConfig, ssl_forward

from helpers import numeric_grad, rel_error

N_TOKENS = 5


def _length_for(n_tokens, cfg):
    length = cfg.encoder.min_length
    while token_length(length, cfg.encoder) < n_tokens:
        length += 1
    return length


def _setup(mode):
    cfg = tiny_config(mode)
    model = build_model(cfg, seed=3, dtype=np.float64)
    length = _length_for(N_TOKENS, cfg)
    x = np.random.default_rng(5).normal(size=(2, 6, length))
    plans = [plan_span(N_TOKENS, 2, Rng(11, ("a",))), plan_span(N_TOKENS, 3, Rng(11, ("b",)))]
    model.eval()  # dropout-free; the tiny config has zero dropout anyway

    def loss_value():
        with no_grad():
            loss, _ = ssl_forward(model, x, MaskSpec.single_span(2), Rng(9), ContrastiveConfig(negatives=2), plans)
        return loss.item()

    return model, x, plans, loss_value


@pytest.mark.parametrize("mode", ["maeeg", "bendr"])
def test_tiny_model_gradients(mode):
    model, x, plans, loss_value = _setup(mode)
    assert token_length(x.shape[-1], model.config.encoder) == N_TOKENS
    loss, _ = ssl_forward(model, x, MaskSpec.single_span(2), Rng(9), ContrastiveConfig(negatives=2), plans)
    model.zero_grad()
    loss.backward()
    pick = np.random.default_rng(0)
    worst = {}
    for name, p in model.named_parameters().items():
        entries = pick.choice(p.size, size=min(p.size, 6), replace=False)
        numeric = numeric_grad(lambda *_: loss_value(), [p.data], 0, eps=1e-6, entries=entries)
        worst[name] = rel_error(p.grad, numeric)
    bad = {k: v for k, v in worst.items() if not v < 1e-5}
    assert not bad, bad


def test_mask_blocks_gradient_to_masked_features():
    model, x, plans, _ = _setup("maeeg")
    from maeeg.core import Tensor
    from maeeg.masking import apply_mask

    t = Tensor(np.random.default_rng(0).normal(size=(2, 8, N_TOKENS)), requires_grad=True)
    q = apply_mask(t, plans, Rng(1))
    (q.q * q.q).sum().backward()
    for b, plan in enumerate(plans):
        assert np.all(t.grad[b][:, plan.indices] == 0)
        unmasked = np.setdiff1d(np.arange(N_TOKENS), plan.indices)
        np.testing.assert_allclose(t.grad[b][:, unmasked], 2 * t.data[b][:, unmasked])
