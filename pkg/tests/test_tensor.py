import numpy as np
import pytest

from errors import ConfigError, DataError, NumericError, ShapeError
from helpers import analytic_grad, numeric_grad
from tensor import (Tensor, add, add_bias, bce_with_logits, concat_cols, conv1d, dropout, matmul, maxpool1d,
                    mul, pad_rows, relu, reshape, scale, sigmoid, take_rows, tanh, total)


def rand(shape, seed, grad=True):
    return Tensor(np.random.default_rng(seed).normal(size=shape), requires_grad=grad)


def check(loss_fn, *tensors, tol=1e-6):
    for t in tensors:
        want = numeric_grad(loss_fn, t)
        got = analytic_grad(loss_fn, t)
        assert np.allclose(got, want, atol=tol, rtol=1e-5)


def test_matmul_bias_tanh_gradients():
    a, w, b = rand((4, 3), 0), rand((3, 2), 1), rand((1, 2), 2)
    check(lambda: total(tanh(add_bias(matmul(a, w), b))), a, w, b)


def test_elementwise_gradients():
    a, b = rand((3, 3), 3), rand((3, 3), 4)
    check(lambda: total(mul(sigmoid(a), add(b, scale(a, 0.5)))), a, b)


def test_relu_gradient_away_from_kink():
    a = Tensor(np.array([[0.7, -1.2], [2.0, -0.3]]), requires_grad=True)
    check(lambda: total(mul(relu(a), relu(a))), a)


def test_concat_reshape_take_pad_gradients():
    a, b = rand((4, 2), 5), rand((4, 3), 6)

    def loss():
        z = concat_cols(a, b)
        picked = pad_rows(take_rows(z, np.array([3, 0, 0])), 5)
        flat = reshape(picked, 1, 25)
        return total(mul(flat, flat))

    check(loss, a, b)


def test_conv1d_gradients():
    x = rand((2, 9), 7)
    k = rand((3, 2 * 3), 8)
    bias = rand((3, 1), 9)
    check(lambda: total(tanh(conv1d(x, k, width=3, stride=2, bias=bias))), x, k, bias)


def test_conv1d_matches_direct_loop():
    x = np.random.default_rng(0).normal(size=(2, 8))
    k = np.random.default_rng(1).normal(size=(4, 2 * 3))
    out = conv1d(Tensor(x), Tensor(k), width=3, stride=2).data
    kern = k.reshape(4, 2, 3)
    for o in range(4):
        for t in range(3):
            want = np.sum(kern[o] * x[:, 2 * t:2 * t + 3])
            assert out[o, t] == pytest.approx(want, abs=1e-12)


def test_conv1d_width_too_large():
    with pytest.raises(ShapeError):
        conv1d(Tensor(np.ones((1, 3))), Tensor(np.ones((1, 4))), width=4)


def test_maxpool_forward_and_gradient():
    x = Tensor(np.array([[1.0, 3.0, 2.0, 2.0, 5.0]]), requires_grad=True)
    y = maxpool1d(x, 2, 2)
    assert y.data.tolist() == [[3.0, 2.0]]
    total(y).backward()
    assert x.grad.tolist() == [[0.0, 1.0, 1.0, 0.0, 0.0]]


def test_bce_matches_direct_formula():
    z = np.array([[2.0], [-1.0], [0.0]])
    y = np.array([1, 0, 1])
    p = 1.0 / (1.0 + np.exp(-z[:, 0]))
    want = -np.mean(y * np.log(p) + (1 - y) * np.log(1 - p))
    assert bce_with_logits(Tensor(z), y).item() == pytest.approx(want, abs=1e-12)


def test_bce_is_stable_for_large_logits():
    loss = bce_with_logits(Tensor(np.array([[1000.0], [-1000.0]])), [0, 1])
    assert loss.item() == pytest.approx(1000.0)


def test_bce_gradient():
    z = rand((5, 1), 10)
    y = [1, 0, 0, 1, 1]
    check(lambda: bce_with_logits(z, y), z)


def test_bce_rejects_bad_labels():
    with pytest.raises(DataError):
        bce_with_logits(Tensor(np.zeros((2, 1))), [0, 2])
    with pytest.raises(ShapeError):
        bce_with_logits(Tensor(np.zeros((2, 1))), [0])


def test_dropout_eval_is_identity():
    x = rand((3, 3), 11)
    assert dropout(x, 0.5, False, None) is x
    assert dropout(x, 0.0, True, np.random.default_rng(0)) is x


def test_dropout_training_scales_kept_units():
    x = Tensor(np.ones((50, 40)))
    y = dropout(x, 0.5, True, np.random.default_rng(3)).data
    assert set(np.unique(y).tolist()) <= {0.0, 2.0}
    assert 0.4 < np.mean(y == 0.0) < 0.6


def test_dropout_probability_bounds():
    with pytest.raises(ConfigError):
        dropout(Tensor(np.ones((1, 1))), 1.0, True, np.random.default_rng(0))


def test_non_finite_result_raises():
    big = Tensor(np.array([[1e308]]))
    with pytest.raises(NumericError):
        scale(big, 10.0)


def test_backward_needs_scalar():
    with pytest.raises(ShapeError):
        rand((2, 2), 12).backward()


def test_shared_input_gradients_accumulate():
    a = Tensor(np.array([[3.0]]), requires_grad=True)
    total(add(a, a)).backward()
    assert a.grad.tolist() == [[2.0]]


def test_leaf_grads_accumulate_until_cleared():
    a = Tensor(np.array([[1.0, 2.0]]), requires_grad=True)
    total(a).backward()
    total(a).backward()
    assert a.grad.tolist() == [[2.0, 2.0]]


def test_hand_values():
    assert relu(Tensor([[-1.0, 0.0, 2.0]])).data.tolist() == [[0.0, 0.0, 2.0]]
    assert sigmoid(Tensor([[0.0]])).item() == 0.5
    assert bce_with_logits(Tensor([[0.0]]), [1]).item() == pytest.approx(np.log(2.0), abs=1e-12)
    assert bce_with_logits(Tensor([[40.0]]), [1]).item() == pytest.approx(0.0, abs=1e-15)
    conv = conv1d(Tensor([[1.0, 2.0, 3.0, 4.0]]), Tensor([[1.0, 1.0]]), width=2)
    assert conv.data.tolist() == [[3.0, 5.0, 7.0]]
    assert maxpool1d(Tensor([[1.0, 3.0, 2.0, 5.0]]), 2, 2).data.tolist() == [[3.0, 5.0]]


def test_dropout_keeps_the_mean():
    y = dropout(Tensor(np.ones((200, 200))), 0.5, True, np.random.default_rng(9)).data
    assert 0.97 <= y.mean() <= 1.03


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_backward_is_linear_in_the_loss(seed):
    a = rand((3, 2), seed)
    w = rand((2, 2), seed + 1)
    base = analytic_grad(lambda: total(tanh(matmul(a, w))), a)
    scaled = analytic_grad(lambda: scale(total(tanh(matmul(a, w))), -2.5), a)
    assert np.allclose(scaled, -2.5 * base, atol=1e-12)
