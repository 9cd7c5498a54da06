"""Differentiation engine: forward values against naive oracles, reverse
gradients against central finite differences."""
import numpy as np
import pytest

from mocaptk.errors import NonScalarLoss, ShapeMismatch
from mocaptk.nn import tensor as T
from mocaptk.nn.tensor import Tensor

from conftest import finite_difference_check


def test_softmax_uniform_on_equal_logits():
    s = T.softmax(Tensor([0.0, 0.0, 0.0]))
    np.testing.assert_allclose(s.data, [1 / 3, 1 / 3, 1 / 3], atol=1e-15)


def test_softmax_normalized_and_positive(rng):
    x = Tensor(rng.standard_normal((7, 11)) * 10)
    s = T.softmax(x).data
    assert abs(s.sum(axis=-1) - 1.0).max() < 1e-12
    assert (s > 0).all()


def test_tanh_sigmoid_at_zero():
    assert T.tanh(Tensor(0.0)).item() == 0.0
    assert T.sigmoid(Tensor(0.0)).item() == 0.5


def test_matmul_matches_triple_loop(rng):
    a = rng.standard_normal((3, 4))
    b = rng.standard_normal((4, 2))
    want = np.zeros((3, 2))
    for i in range(3):
        for j in range(2):
            for k in range(4):
                want[i, j] += a[i, k] * b[k, j]
    got = T.matmul(Tensor(a), Tensor(b)).data
    np.testing.assert_allclose(got, want, atol=1e-12)


def test_matmul_shape_mismatch():
    with pytest.raises(ShapeMismatch):
        T.matmul(Tensor(np.zeros((2, 3))), Tensor(np.zeros((2, 3))))


def test_backward_sum_of_squares():
    x = Tensor([1.0, 2.0, 3.0], requires_grad=True)
    loss = T.tsum(T.square(x))
    loss.backward()
    np.testing.assert_allclose(x.grad, [2.0, 4.0, 6.0])


def test_backward_accumulates_until_zeroed():
    x = Tensor([1.0, 2.0], requires_grad=True)
    T.tsum(T.square(x)).backward()
    T.tsum(T.square(x)).backward()
    np.testing.assert_allclose(x.grad, [4.0, 8.0])
    x.zero_grad()
    T.tsum(T.square(x)).backward()
    np.testing.assert_allclose(x.grad, [2.0, 4.0])


def test_backward_rejects_non_scalar():
    x = Tensor([1.0, 2.0], requires_grad=True)
    with pytest.raises(NonScalarLoss):
        T.square(x).backward()


def test_no_grad_suppresses_graph():
    x = Tensor([1.0, 2.0], requires_grad=True)
    with T.no_grad():
        y = T.tsum(T.square(x))
    assert y.op is None and not y.requires_grad


def test_two_layer_tanh_net_gradcheck(rng):
    w1 = Tensor(rng.standard_normal((5, 4)) * 0.5, requires_grad=True)
    b1 = Tensor(rng.standard_normal(5) * 0.1, requires_grad=True)
    w2 = Tensor(rng.standard_normal((3, 5)) * 0.5, requires_grad=True)
    b2 = Tensor(rng.standard_normal(3) * 0.1, requires_grad=True)
    x = Tensor(rng.standard_normal((6, 4)))

    def loss_fn():
        h = T.tanh(T.affine(x, w1, b1))
        y = T.tanh(T.affine(h, w2, b2))
        return T.tmean(T.square(y))

    assert finite_difference_check(loss_fn, [w1, b1, w2, b2]) < 1e-4


def test_mixed_ops_gradcheck(rng):
    a = Tensor(rng.uniform(0.5, 2.0, size=(4, 3)), requires_grad=True)
    b = Tensor(rng.uniform(0.5, 2.0, size=(4, 3)), requires_grad=True)

    def loss_fn():
        m = T.minimum(T.exp(a), T.square(b))
        s = T.concat([m, T.log(b)], axis=1)
        picked = s[1:3, :2]
        return T.tsum(picked) + T.tmean(T.sqrt(a)) * 0.5

    assert finite_difference_check(loss_fn, [a, b]) < 1e-4


def test_softmax_nll_gradcheck(rng):
    logits = Tensor(rng.standard_normal((5, 4)), requires_grad=True)
    labels = np.array([0, 3, 1, 2, 2])

    def loss_fn():
        return T.nll_loss(logits, labels)

    assert finite_difference_check(loss_fn, [logits]) < 1e-4


def test_tied_affine_routes_both_gradient_paths(rng):
    w = Tensor(rng.standard_normal((4, 3)) * 0.3, requires_grad=True)
    b1 = Tensor(np.zeros(4), requires_grad=True)
    b2 = Tensor(np.zeros(3), requires_grad=True)
    x = Tensor(rng.standard_normal((5, 3)))

    def loss_fn():
        h = T.tanh(T.affine(x, w, b1))
        back = T.affine(h, w, b2, tied=True)
        return T.tmean(T.square(back - x))

    assert finite_difference_check(loss_fn, [w, b1, b2]) < 1e-4


def test_select_rows_and_reshape_sum_axis(rng):
    a = Tensor(rng.standard_normal((6, 4)), requires_grad=True)

    def loss_fn():
        r = T.reshape(a, (2, 3, 4))
        summed = T.tsum(r, axis=0)  # (3, 4)
        return T.tmean(T.select_rows(summed, [1, 0, 3]))

    assert finite_difference_check(loss_fn, [a]) < 1e-4


def test_broadcast_add_unbroadcasts_gradient():
    a = Tensor(np.ones((3, 4)), requires_grad=True)
    b = Tensor(np.ones(4), requires_grad=True)
    T.tsum(a + b).backward()
    assert a.grad.shape == (3, 4)
    assert b.grad.shape == (4,)
    np.testing.assert_allclose(b.grad, 3.0)
