"""Finite-difference checks for every differentiable operator."""

import numpy as np
import pytest

from maeeg.core import (
    Parameter,
    Rng,
    Tensor,
    concat,
    conv1d,
    cosine_similarity,
    cross_entropy,
    dropout,
    gelu,
    group_norm,
    layer_norm,
    linear,
    log_softmax,
    masked_fill,
    matmul,
    no_grad,
    softmax,
)
from maeeg.errors import ContractError, DimensionError

from helpers import check_op

R = np.random.default_rng(1234)


def rnd(*shape, low=None):
    x = R.normal(size=shape)
    if low is not None:
        x = np.abs(x) + low
    return x


MASK = R.random((3, 4)) < 0.5
FILL = R.normal(size=(3, 4))
LABELS = np.array([0, 3, 1, 4])
DROP_KEEP_SEED = 7

OPS = {
    "add_broadcast": (lambda a, b: a + b, [rnd(3, 4), rnd(4)]),
    "sub_broadcast": (lambda a, b: a - b, [rnd(2, 3, 4), rnd(3, 1)]),
    "mul": (lambda a, b: a * b, [rnd(3, 4), rnd(3, 4)]),
    "div": (lambda a, b: a / b, [rnd(3, 4), rnd(3, 4, low=0.5)]),
    "rsub_scalar": (lambda a: 2.0 - a, [rnd(5)]),
    "rdiv_scalar": (lambda a: 1.5 / a, [rnd(5, low=0.5)]),
    "neg": (lambda a: -a, [rnd(3, 2)]),
    "pow": (lambda a: a ** 3, [rnd(4, 3)]),
    "pow_half": (lambda a: a ** 0.5, [rnd(4, low=0.5)]),
    "matmul_batched": (lambda a, b: a @ b, [rnd(2, 3, 4), rnd(4, 5)]),
    "matmul_fn": (matmul, [rnd(3, 4), rnd(2, 4, 2)]),
    "exp": (lambda a: a.exp(), [rnd(3, 3)]),
    "log": (lambda a: a.log(), [rnd(3, 3, low=0.2)]),
    "tanh": (lambda a: a.tanh(), [rnd(6)]),
    "sum_all": (lambda a: a.sum(), [rnd(3, 4)]),
    "sum_axis": (lambda a: a.sum(axis=1, keepdims=True), [rnd(3, 4, 2)]),
    "mean_axis": (lambda a: a.mean(axis=(0, 2)), [rnd(3, 4, 2)]),
    "reshape": (lambda a: a.reshape(6, 2) * a.reshape(6, 2), [rnd(3, 4)]),
    "transpose": (lambda a: a.transpose(2, 0, 1), [rnd(2, 3, 4)]),
    "swapaxes": (lambda a: a.swapaxes(-1, -2), [rnd(2, 3, 4)]),
    "T": (lambda a: a.T, [rnd(3, 4)]),
    "getitem_slice": (lambda a: a[:, 1:3], [rnd(3, 4)]),
    "getitem_fancy_repeat": (lambda a: a[np.array([0, 2, 0, 1])], [rnd(3, 4)]),
    "linear": (linear, [rnd(2, 5, 3), rnd(4, 3), rnd(4)]),
    "conv1d_plain": (conv1d, [rnd(2, 3, 11), rnd(4, 3, 3), rnd(4)]),
    "conv1d_stride": (lambda x, w: conv1d(x, w, stride=2), [rnd(2, 3, 13), rnd(4, 3, 3)]),
    "conv1d_groups_pad": (lambda x, w, b: conv1d(x, w, b, padding=2, groups=2),
                          [rnd(2, 4, 9), rnd(6, 2, 5), rnd(6)]),
    "conv1d_unbatched": (lambda x, w: conv1d(x, w, stride=3), [rnd(2, 10), rnd(3, 2, 3)]),
    "gelu": (gelu, [rnd(4, 5) * 2]),
    "group_norm": (lambda x, g, b: group_norm(x, 2, g, b), [rnd(2, 4, 6), rnd(4), rnd(4)]),
    "layer_norm": (layer_norm, [rnd(2, 3, 5), rnd(5), rnd(5)]),
    "softmax": (softmax, [rnd(3, 5)]),
    "softmax_axis0": (lambda a: softmax(a, axis=0), [rnd(3, 5)]),
    "log_softmax": (log_softmax, [rnd(3, 5)]),
    "cosine_flat": (cosine_similarity, [rnd(3, 4), rnd(3, 4)]),
    "cosine_axis_broadcast": (lambda a, b: cosine_similarity(a, b, axis=-1), [rnd(4, 1, 3), rnd(4, 5, 3)]),
    "cross_entropy": (lambda z: cross_entropy(z, LABELS), [rnd(4, 5)]),
    "masked_fill": (lambda a: masked_fill(a, MASK, FILL) * a, [rnd(3, 4)]),
    "concat": (lambda a, b: concat([a, b], axis=1), [rnd(2, 3), rnd(2, 2)]),
    "dropout_fixed_rng": (lambda a: dropout(a, 0.3, True, Rng(DROP_KEEP_SEED)), [rnd(4, 6)]),
}


@pytest.mark.parametrize("name", sorted(OPS))
def test_op_gradient_f64(name):
    op, arrays = OPS[name]
    assert check_op(op, *arrays) < 1e-5


@pytest.mark.parametrize("name", sorted(OPS))
def test_op_gradient_f32(name):
    op, arrays = OPS[name]
    assert check_op(op, *arrays, dtype=np.float32) < 1e-4


def test_gelu_value_at_three():
    # tanh form; the exact erf form would give 2.99595
    assert gelu(Tensor(np.array([3.0]))).data[0] == pytest.approx(2.99636, abs=1e-5)


def test_gradients_accumulate_across_backward_calls():
    w = Parameter(np.array([1.0, 2.0]), dtype=np.float64)
    (w * w).sum().backward()
    (w * 3.0).sum().backward()
    np.testing.assert_allclose(w.grad, 2 * w.data + 3.0)


def test_shared_subexpression_gradient():
    a = Tensor(np.array([1.5, -2.0]), requires_grad=True)
    b = a * a
    (b + b * a).sum().backward()
    np.testing.assert_allclose(a.grad, 2 * a.data + 3 * a.data ** 2)


def test_backward_requires_scalar():
    a = Tensor(np.ones(3), requires_grad=True)
    with pytest.raises(ContractError):
        (a * 2.0).backward()


def test_no_grad_records_nothing():
    a = Tensor(np.ones(3), requires_grad=True)
    with no_grad():
        out = (a * 2.0).sum()
    assert not out.requires_grad


def test_matmul_shape_mismatch():
    with pytest.raises(DimensionError):
        matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((4, 2))))


def test_default_storage_is_float32():
    assert Tensor([1.0, 2.0]).dtype == np.float32
    assert Tensor(np.ones(2)).sum().data.dtype in (np.float32, np.float64)


def test_dropout_eval_is_identity_and_train_is_inverted():
    x = Tensor(np.ones((200, 50)))
    assert dropout(x, 0.5, False) is x or np.array_equal(dropout(x, 0.5, False).data, x.data)
    y = dropout(x, 0.5, True, Rng(0)).data
    assert set(np.unique(y)) <= {0.0, 2.0}
    assert abs(y.mean() - 1.0) < 0.05


def test_dropout_training_without_rng_is_contract_error():
    with pytest.raises(ContractError):
        dropout(Tensor(np.ones(3)), 0.1, True, None)


def test_cosine_of_zero_vector_is_zero_with_finite_gradient():
    a = Tensor(np.zeros(4), requires_grad=True)
    b = Tensor(np.arange(1.0, 5.0), requires_grad=True)
    c = cosine_similarity(a, b)
    assert c.item() == 0.0
    c.backward()
    assert np.all(np.isfinite(a.grad)) and np.all(np.isfinite(b.grad))
